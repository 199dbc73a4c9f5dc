#include "apspec/prufer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <boost/numeric/odeint.hpp>

#include "apspec/fd.hpp"

namespace apspec {

namespace odeint = boost::numeric::odeint;

namespace {

using State = std::vector<double>;

struct StepGuard {
  std::size_t max_steps;
  std::size_t steps = 0;
  double last_x = 0.0;
  void operator()(const State&, double x) {
    last_x = x;
    if (++steps > max_steps) {
      std::ostringstream os;
      os << "Prufer integration exceeded " << max_steps << " steps near x = " << last_x;
      throw NonConvergence(os.str());
    }
  }
};

template <class System>
void integrate(System&& system, State& y, double a, double b, const FlowOptions& opts,
               StepGuard& guard) {
  if (a == b) return;
  auto stepper = odeint::make_controlled(opts.abs_tol, opts.rel_tol, opts.max_step,
                                         odeint::runge_kutta_fehlberg78<State>());
  const double dt = std::min(opts.initial_step, std::abs(b - a));
  try {
    if (b > a) {
      odeint::integrate_adaptive(stepper, system, y, a, b, dt, std::ref(guard));
    } else {
      // Backward flow as a forward flow in s = -x; the step cap is unsigned.
      auto reversed = [&](const State& z, State& dz, double s) {
        system(z, dz, -s);
        for (auto& v : dz) v = -v;
      };
      odeint::integrate_adaptive(stepper, reversed, y, -a, -b, dt, std::ref(guard));
    }
  } catch (const NonConvergence&) {
    throw;
  } catch (const std::exception& e) {
    std::ostringstream os;
    os << "Prufer step failure near |x| = " << std::abs(guard.last_x) << ": " << e.what();
    throw NonConvergence(os.str());
  }
}

void check_k(double k) {
  if (!(k > 0) || !std::isfinite(k)) throw InvalidArgument("Prufer wavenumber k must be > 0");
}

}  // namespace

std::vector<double> PruferTrajectory::u() const {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(logA[i]) * std::sin(phi[i]);
  return out;
}

std::vector<double> PruferTrajectory::du() const {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = k * std::exp(logA[i]) * std::cos(phi[i]);
  return out;
}

PruferTrajectory prufer_flow(const Potential& V, double a, double b, double k, double theta0,
                             const FlowOptions& opts) {
  check_k(k);
  require(std::isfinite(a) && std::isfinite(b) && a != b, "flow interval must be finite and nonempty");
  require(opts.samples >= 2, "trajectory needs >= 2 samples");
  auto system = [&](const State& y, State& dy, double x) {
    const double v = V(x);
    const double s = std::sin(y[0]);
    dy[0] = k - v * s * s / k;
    dy[1] = v * std::sin(2.0 * y[0]) / (2.0 * k);
  };
  PruferTrajectory traj;
  traj.k = k;
  State y{theta0, opts.logA0};
  StepGuard guard{opts.max_steps};
  const auto n = opts.samples;
  traj.x.resize(n);
  traj.phi.resize(n);
  traj.logA.resize(n);
  traj.x[0] = a;
  traj.phi[0] = y[0];
  traj.logA[0] = y[1];
  for (std::size_t i = 1; i < n; ++i) {
    const double x0 = a + (b - a) * static_cast<double>(i - 1) / static_cast<double>(n - 1);
    const double x1 = i + 1 == n ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    integrate(system, y, x0, x1, opts, guard);
    traj.x[i] = x1;
    traj.phi[i] = y[0];
    traj.logA[i] = y[1];
  }
  return traj;
}

std::vector<double> prufer_endpoint_angles(const Potential& V, double a, double b,
                                           const std::vector<double>& ks,
                                           const std::vector<double>& theta0,
                                           const FlowOptions& opts) {
  require(ks.size() == theta0.size(), "one start angle per wavenumber");
  for (double k : ks) check_k(k);
  auto system = [&](const State& y, State& dy, double x) {
    const double v = V(x);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const double s = std::sin(y[i]);
      dy[i] = ks[i] - v * s * s / ks[i];
    }
  };
  State y = theta0;
  StepGuard guard{opts.max_steps};
  integrate(system, y, a, b, opts, guard);
  return y;
}

double reconstruction_residual(const PruferTrajectory& traj, const Potential& V) {
  require(traj.x.size() >= 5, "reconstruction check needs >= 5 samples");
  const auto u = traj.u();
  const double step = traj.x[1] - traj.x[0];
  const auto d2 = fd::derivative(u, step, 2);
  double scale = 0, worst = 0;
  for (double v : u) scale = std::max(scale, traj.k * traj.k * std::abs(v));
  for (std::size_t i = 2; i + 2 < u.size(); ++i)
    worst = std::max(worst, std::abs(-d2[i] + (V(traj.x[i]) - traj.k * traj.k) * u[i]));
  return scale > 0 ? worst / scale : worst;
}

double continuity_ratio(const PruferTrajectory& traj, double sup_abs_v) {
  double worst = 0;
  const double speed = traj.k + sup_abs_v / traj.k;
  for (std::size_t i = 1; i < traj.x.size(); ++i) {
    const double h = std::abs(traj.x[i] - traj.x[i - 1]);
    worst = std::max(worst, std::abs(traj.phi[i] - traj.phi[i - 1]) / (h * speed));
  }
  return worst;
}

void write_csv(std::ostream& os, const PruferTrajectory& traj) {
  const auto old = os.precision(17);
  os << "x,phi,logA\n";
  for (std::size_t i = 0; i < traj.x.size(); ++i)
    os << traj.x[i] << ',' << traj.phi[i] << ',' << traj.logA[i] << '\n';
  os.precision(old);
}

double BumpBasis::bump(std::size_t j, double x) const {
  const double w = (b - a) / static_cast<double>(size);
  const double lo = a + w * static_cast<double>(j);
  if (x <= lo || x >= lo + w) return 0.0;
  const double s = 2.0 * (x - lo) / w - 1.0;
  return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

double BumpBasis::evaluate(const std::vector<double>& coeffs, double x) const {
  if (x <= a || x >= b || size == 0) return 0.0;
  const double w = (b - a) / static_cast<double>(size);
  const auto j = std::min(size - 1, static_cast<std::size_t>((x - a) / w));
  return coeffs[j] * bump(j, x);
}

Potential ShootResult::potential() const {
  return [basis = basis, c = coefficients](double x) { return basis.evaluate(c, x); };
}

nlohmann::json ShootResult::to_json() const {
  return {{"interval", {basis.a, basis.b}},
          {"coefficients", coefficients},
          {"iterations", iterations},
          {"residual", residual},
          {"residual_history", residual_history},
          {"jacobian_condition", jacobian_condition},
          {"jacobian_rank", jacobian_rank},
          {"cn_norm", cn_norm},
          {"budget_ok", budget_ok},
          {"feasible_offset_scale", feasible_offset_scale},
          {"final_angles", final_angles}};
}

Eigen::MatrixXd rotation_jacobian(const BumpBasis& basis, const std::vector<double>& ks,
                                  const std::vector<double>& theta_start) {
  const std::size_t per_cell = 400;
  const double w = (basis.b - basis.a) / static_cast<double>(basis.size);
  Eigen::MatrixXd J(static_cast<Eigen::Index>(ks.size()), static_cast<Eigen::Index>(basis.size));
  for (std::size_t i = 0; i < ks.size(); ++i)
    for (std::size_t j = 0; j < basis.size; ++j) {
      const double lo = basis.a + w * static_cast<double>(j);
      double sum = 0;
      for (std::size_t q = 1; q < per_cell; ++q) {
        const double x = lo + w * static_cast<double>(q) / static_cast<double>(per_cell);
        const double s = std::sin(ks[i] * (x - basis.a) + theta_start[i]);
        sum += basis.bump(j, x) * s * s;
      }
      J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          -sum * w / static_cast<double>(per_cell) / ks[i];
    }
  return J;
}

double cn_norm(const Potential& V, double a, double b, int N, std::size_t samples) {
  require(N >= 0 && N <= fd::kMaxOrder, "C^N norm supports N <= 4");
  const double step = (b - a) / static_cast<double>(samples - 1);
  std::vector<double> v(samples);
  for (std::size_t i = 0; i < samples; ++i) v[i] = V(a + step * static_cast<double>(i));
  double total = 0;
  for (int j = 0; j <= N; ++j) {
    const auto d = fd::derivative(v, step, j);
    double sup = 0;
    for (double x : d) sup = std::max(sup, std::abs(x));
    total += sup;
  }
  return total;
}

ShootResult shoot_rotation(double a, double b, const std::vector<double>& ks,
                           const std::vector<double>& theta_start,
                           const std::vector<double>& theta_target, const ShootConfig& cfg) {
  const std::size_t n = ks.size();
  require(n >= 1, "shooting needs at least one wavenumber");
  require(theta_start.size() == n && theta_target.size() == n, "one start and target angle per wavenumber");
  require(std::isfinite(a) && std::isfinite(b) && b > a, "shooting interval must satisfy a < b");
  for (std::size_t i = 0; i < n; ++i) {
    check_k(ks[i]);
    for (std::size_t j = 0; j < i; ++j)
      require(std::abs(ks[i] - ks[j]) > 1e-12, "shooting wavenumbers must be distinct");
  }
  ShootResult result;
  result.basis = BumpBasis{a, b, cfg.basis_size ? cfg.basis_size : 2 * n};
  require(result.basis.size >= n, "bump basis must have at least n elements");
  result.coefficients.assign(result.basis.size, 0.0);
  const auto& basis = result.basis;

  FlowOptions flow = cfg.flow;
  flow.max_step = std::min(flow.max_step, (b - a) / static_cast<double>(basis.size) / 200.0);
  auto angles = [&](const std::vector<double>& c) {
    Potential V = [&](double x) {
      double v = basis.evaluate(c, x);
      if (cfg.background) v += cfg.background(x);
      return v;
    };
    return prufer_endpoint_angles(V, a, b, ks, theta_start, flow);
  };
  auto mismatch = [&](const std::vector<double>& phi) {
    Eigen::VectorXd m(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) m[static_cast<Eigen::Index>(i)] = theta_target[i] - phi[i];
    return m;
  };

  Eigen::MatrixXd J = rotation_jacobian(basis, ks, theta_start);
  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    const auto& s = svd.singularValues();
    result.jacobian_condition = s[0] / s[s.size() - 1];
    result.jacobian_rank = static_cast<int>((s.array() > 1e-10 * s[0]).count());
    if (result.jacobian_rank < static_cast<int>(n)) {
      std::ostringstream os;
      os << "rotation Jacobian is rank deficient (rank " << result.jacobian_rank << " of " << n
         << ", condition " << result.jacobian_condition << ")";
      throw InvalidArgument(os.str());
    }
  }

  auto phi = angles(result.coefficients);
  Eigen::VectorXd m = mismatch(phi);
  result.residual = m.cwiseAbs().maxCoeff();
  result.residual_history.push_back(result.residual);
  while (result.residual > cfg.tolerance) {
    if (result.iterations >= cfg.max_iterations) {
      std::ostringstream os;
      os << "rotation shooting did not converge in " << cfg.max_iterations
         << " iterations (angle error " << result.residual << ")";
      throw NonConvergence(os.str());
    }
    if (result.iterations > 0) {
      for (std::size_t j = 0; j < basis.size; ++j) {
        auto plus = result.coefficients, minus = result.coefficients;
        plus[j] += cfg.fd_step;
        minus[j] -= cfg.fd_step;
        const auto fp = angles(plus), fm = angles(minus);
        for (std::size_t i = 0; i < n; ++i)
          J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (fp[i] - fm[i]) / (2 * cfg.fd_step);
      }
    }
    const Eigen::VectorXd dc = J.completeOrthogonalDecomposition().solve(m);
    // Backtrack while the step increases the error.
    double t = 1.0;
    std::vector<double> trial;
    Eigen::VectorXd trial_m;
    for (int halving = 0; halving < 12; ++halving, t *= 0.5) {
      trial = result.coefficients;
      for (std::size_t j = 0; j < basis.size; ++j) trial[j] += t * dc[static_cast<Eigen::Index>(j)];
      trial_m = mismatch(angles(trial));
      if (trial_m.cwiseAbs().maxCoeff() < result.residual) break;
    }
    result.coefficients = trial;
    m = trial_m;
    result.residual = m.cwiseAbs().maxCoeff();
    result.residual_history.push_back(result.residual);
    ++result.iterations;
  }
  result.final_angles = angles(result.coefficients);
  const Potential V = result.potential();
  result.cn_norm = cn_norm(V, a, b, cfg.budget_order);
  result.budget_ok = result.cn_norm <= cfg.epsilon;
  result.feasible_offset_scale = result.budget_ok ? 1.0 : cfg.epsilon / result.cn_norm;
  if (!result.budget_ok && cfg.enforce_budget) {
    std::ostringstream os;
    os << "C^" << cfg.budget_order << " norm " << result.cn_norm << " exceeds budget " << cfg.epsilon
       << "; shrink target offsets by about " << result.feasible_offset_scale;
    throw NonConvergence(os.str());
  }
  return result;
}

}  // namespace apspec

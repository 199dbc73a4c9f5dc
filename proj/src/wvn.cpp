#include "apspec/wvn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "apspec/cutoffs.hpp"
#include "apspec/spectral.hpp"

namespace apspec {

namespace {

// Below this radius the corrections live; flows there use the refined step.
constexpr double kInner = 1.0;
constexpr double kInnerStep = 2e-4;

double wrap_half_pi(double d) { return d - kPi * std::round(d / kPi); }

FlowOptions refined(const FlowOptions& opts) {
  FlowOptions f = opts;
  f.max_step = std::min(opts.max_step, kInnerStep);
  return f;
}

/// Angles after flowing from a to b, refining the step on the part below kInner.
std::vector<double> angles_between(const Potential& V, double a, double b, const std::vector<double>& ks,
                                   std::vector<double> theta, const FlowOptions& opts) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  if (lo >= kInner || hi <= kInner) {
    return prufer_endpoint_angles(V, a, b, ks, theta, hi <= kInner ? refined(opts) : opts);
  }
  if (a < b) {
    theta = prufer_endpoint_angles(V, a, kInner, ks, theta, refined(opts));
    return prufer_endpoint_angles(V, kInner, b, ks, theta, opts);
  }
  theta = prufer_endpoint_angles(V, a, kInner, ks, theta, opts);
  return prufer_endpoint_angles(V, kInner, b, ks, theta, refined(opts));
}

double far_angle(double kappa, double phi, double far) { return kappa * far + 0.5 * phi + 0.5 * kPi; }

struct Level {
  double kappa, R, phi;
  Correction corr;
};

double evaluate_levels(const std::vector<Level>& levels, double x) {
  const double ax = std::abs(x);
  double s = 0;
  for (const auto& l : levels) {
    if (ax > l.R) s += 4.0 * l.kappa * tail_cutoff(ax / l.R) * std::sin(2.0 * l.kappa * ax + l.phi) / ax;
    s += l.corr(ax);
  }
  return s;
}

Potential levels_potential(std::vector<Level> levels) {
  return [levels = std::move(levels)](double x) { return evaluate_levels(levels, x); };
}

Eigenfunction to_eigenfunction(const PruferTrajectory& t, double kappa) {
  Eigenfunction e;
  e.kappa = kappa;
  e.x = t.x;
  e.u = t.u();
  e.du = t.du();
  e.boundary_value = std::abs(e.u.front());
  for (double v : e.u) e.peak = std::max(e.peak, std::abs(v));
  return e;
}

double difference_norm(const Eigenfunction& a, const Eigenfunction& b, double extent, int power) {
  require(a.x.size() == b.x.size(), "stability norm needs matching sample grids");
  std::vector<double> x, du, dd;
  for (std::size_t i = 0; i < a.x.size() && a.x[i] <= extent; ++i) {
    x.push_back(a.x[i]);
    du.push_back(a.u[i] - b.u[i]);
    dd.push_back(a.du[i] - b.du[i]);
  }
  return weighted_norm(x, du, dd, power);
}

double golden_minimize(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - r * (hi - lo), d = lo + r * (hi - lo);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - r * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + r * (hi - lo);
      fd = f(d);
    }
  }
  return fc < fd ? c : d;
}

}  // namespace

double default_majorant(double s) { return std::exp(-s * s / 8.0); }

double activation_floor(double kappa, int n, const Majorant& f) {
  require(kappa > 0 && n >= 1, "activation_floor needs kappa > 0 and n >= 1");
  const double v = f(bracket(kappa) * bracket(static_cast<double>(n)));
  require(v > 0 && std::isfinite(v), "majorant must be positive");
  return std::max(1.0, 1.0 / v);
}

double tail_cutoff(double t) { return cutoff::smooth_step(t - 1.0); }

Potential delta_L(double kappa, double R, double phi) {
  require(kappa > 0 && R > 0, "delta_L needs kappa > 0 and R > 0");
  return [=](double x) {
    const double ax = std::abs(x);
    return ax <= R ? 0.0 : 4.0 * kappa * tail_cutoff(ax / R) * std::sin(2.0 * kappa * ax + phi) / ax;
  };
}

cplx delta_L_coefficient(double kappa, double R, double phi, int sign, double x) {
  require(sign == 1 || sign == -1, "coefficient sign must be +1 or -1");
  const double ax = std::abs(x);
  if (ax <= R) return {};
  const double env = 2.0 * kappa * tail_cutoff(ax / R) / ax;
  // For x < 0 the even extension flips the sign of the phase.
  const double p = x > 0 ? phi : -phi;
  const cplx w_plus = cplx(0, x > 0 ? -1.0 : 1.0) * env * std::exp(cplx(0, p));
  return sign == 1 ? w_plus : std::conj(w_plus);
}

FlowOptions EmbedConfig::default_flow() {
  FlowOptions f;
  f.max_step = 0.05;
  return f;
}

double Eigenfunction::odd(double x_line) const {
  const double ax = std::abs(x_line);
  if (x.empty() || ax > x.back()) return 0.0;
  const auto it = std::upper_bound(x.begin(), x.end(), ax);
  const std::size_t j = std::clamp<std::size_t>(static_cast<std::size_t>(it - x.begin()), 1, x.size() - 1);
  const double t = (ax - x[j - 1]) / (x[j] - x[j - 1]);
  const double v = (1 - t) * u[j - 1] + t * u[j];
  return x_line < 0 ? -v : v;
}

double weighted_norm(const std::vector<double>& x, const std::vector<double>& u, const std::vector<double>& du,
                     int power) {
  require(x.size() == u.size() && x.size() == du.size(), "weighted_norm: size mismatch");
  require(power >= 0, "weighted_norm needs a nonnegative power");
  double a = 0, b = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 1.0 + std::pow(std::abs(x[i]), power);
    a = std::max(a, w * std::abs(u[i]));
    b = std::max(b, w * std::abs(du[i]));
  }
  return a + b;
}

PruferTrajectory decaying_solution(const Potential& V, double kappa, double phi, double far, double sample_step,
                                   const FlowOptions& opts) {
  require(kappa > 0, "decaying_solution needs kappa > 0");
  require(far > 2 * kInner, "decaying_solution needs far > 2");
  require(sample_step > 0, "decaying_solution needs a positive sample step");
  FlowOptions outer = opts, inner = refined(opts);
  outer.samples = static_cast<std::size_t>(std::ceil((far - kInner) / sample_step)) + 1;
  outer.logA0 = -std::log1p(far);
  const auto a = prufer_flow(V, far, kInner, kappa, far_angle(kappa, phi, far), outer);
  inner.samples = static_cast<std::size_t>(std::ceil(kInner / sample_step)) + 1;
  inner.logA0 = a.logA.back();
  const auto b = prufer_flow(V, kInner, 0.0, kappa, a.phi.back(), inner);
  PruferTrajectory t;
  t.k = kappa;
  for (std::size_t i = b.x.size(); i-- > 0;) {
    t.x.push_back(b.x[i]);
    t.phi.push_back(b.phi[i]);
    t.logA.push_back(b.logA[i]);
  }
  for (std::size_t i = a.x.size() - 1; i-- > 0;) {
    t.x.push_back(a.x[i]);
    t.phi.push_back(a.phi[i]);
    t.logA.push_back(a.logA[i]);
  }
  return t;
}

double EmbeddedPlan::W(double x) const {
  const double ax = std::abs(x);
  double s = 0;
  for (std::size_t n = 0; n < kappas.size(); ++n) {
    if (ax > R[n]) s += 4.0 * kappas[n] * tail_cutoff(ax / R[n]) * std::sin(2.0 * kappas[n] * ax + phases[n]) / ax;
    if (n < corrections.size()) s += corrections[n](ax);
  }
  return s;
}

Potential EmbeddedPlan::potential() const {
  return [plan = *this](double x) { return plan.W(x); };
}

CoefficientFamily EmbeddedPlan::family(const UniformGrid& x) const {
  CoefficientFamily fam(x, 1.0);
  for (std::size_t n = 0; n < kappas.size(); ++n)
    for (int sign : {1, -1}) {
      std::vector<cplx> w(x.size);
      for (std::size_t i = 0; i < x.size; ++i) w[i] = delta_L_coefficient(kappas[n], R[n], phases[n], sign, x[i]);
      fam.set(2.0 * sign * kappas[n], std::move(w));
    }
  std::vector<cplx> w0(x.size);
  bool any = false;
  for (std::size_t i = 0; i < x.size; ++i) {
    for (const auto& c : corrections) w0[i] += c(x[i]);
    any = any || w0[i] != 0.0;
  }
  if (any) fam.set(0.0, std::move(w0));
  return fam;
}

nlohmann::json EmbeddedPlan::to_json() const {
  nlohmann::json levels = nlohmann::json::array();
  for (std::size_t n = 0; n < kappas.size(); ++n) {
    const Correction& c = corrections[n];
    levels.push_back({{"kappa", kappas[n]},
                      {"R", R[n]},
                      {"R_floor", R_floor[n]},
                      {"phi", phases[n]},
                      {"phase_mismatch", phase_mismatch[n]},
                      {"doublings", doublings[n]},
                      {"stability", stability[n]},
                      {"stability_linear_weight", stability_linear[n]},
                      {"correction",
                       {{"interval", {c.basis.a, c.basis.b}},
                        {"coefficients", c.coefficients},
                        {"cn_norm", c.cn_norm},
                        {"order", c.order},
                        {"budget", c.budget},
                        {"shoot_residual", c.shoot_residual},
                        {"iterations", c.iterations}}}});
  }
  return {{"levels", levels}, {"majorant", "exp(-s^2/8) unless overridden"}};
}

EmbeddedBuild build_embedded(const std::vector<double>& kappas, const EmbedConfig& cfg) {
  require(cfg.m_max >= 0 && cfg.m_max <= 3, "build_embedded supports m_max <= 3");
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    require(kappas[i] > 0 && std::isfinite(kappas[i]), "kappas must be positive");
    for (std::size_t j = 0; j < i; ++j) require(std::abs(kappas[i] - kappas[j]) > 1e-9, "kappas must be distinct");
  }
  require(cfg.far >= cfg.measure_extent, "far must reach the measured extent");
  require(cfg.stability_power == 1 || cfg.stability_power == 2, "stability_power must be 1 or 2");
  EmbeddedBuild out;
  const std::size_t levels_n = std::min<std::size_t>(kappas.size(), static_cast<std::size_t>(cfg.m_max));
  std::vector<Level> built;

  for (std::size_t m = 0; m < levels_n; ++m) {
    const double kappa = kappas[m];
    const int level = static_cast<int>(m) + 1;
    const double floor = activation_floor(kappa, level, cfg.majorant);
    const Potential W_prev = levels_potential(built);
    const double a = std::ldexp(1.0, -level), b = std::ldexp(1.0, -level + 1);
    const double budget = std::ldexp(1.0, -level);
    const double stability_bound = std::ldexp(1.0, -level);

    double R = floor;
    bool accepted = false;
    std::string why;
    for (int d = 0; d <= cfg.max_doublings && !accepted; ++d, R *= 2.0) {
      if (R > cfg.R_limit) {
        why += "; R = " + std::to_string(R) + " exceeds R_limit";
        break;
      }
      // Phase: the decaying tail solution must meet the Dirichlet solution's angle at R.
      const double theta_dir = angles_between(W_prev, 0.0, R, {kappa}, {0.0}, cfg.flow)[0];
      auto mismatch = [&](double phi) {
        std::vector<Level> trial = built;
        trial.push_back({kappa, R, phi, {}});
        const Potential Wt = levels_potential(std::move(trial));
        const double back = angles_between(Wt, cfg.far, R, {kappa}, {far_angle(kappa, phi, cfg.far)}, cfg.flow)[0];
        return wrap_half_pi(back - theta_dir);
      };
      const std::size_t ns = cfg.phase_scan;
      std::vector<double> ms(ns + 1);
      for (std::size_t j = 0; j < ns; ++j) ms[j] = mismatch(2 * kPi * static_cast<double>(j) / static_cast<double>(ns));
      ms[ns] = ms[0];
      std::optional<double> phi;
      for (std::size_t j = 0; j < ns && !phi; ++j) {
        if (ms[j] == 0.0) phi = 2 * kPi * static_cast<double>(j) / static_cast<double>(ns);
        else if (ms[j] * ms[j + 1] < 0 && std::abs(ms[j] - ms[j + 1]) < 0.5 * kPi) {
          const double lo = 2 * kPi * static_cast<double>(j) / static_cast<double>(ns);
          phi = golden_minimize([&](double p) { return std::abs(mismatch(p)); }, lo, lo + 2 * kPi / static_cast<double>(ns),
                                cfg.phase_tol);
        }
      }
      if (!phi) {
        why += "; no phase root at R = " + std::to_string(R);
        continue;
      }
      const double residual_mismatch = std::abs(mismatch(*phi));

      // Correction: restore u_i(0) = 0 for i <= m by rotating on (a, b).
      std::vector<Level> trial = built;
      trial.push_back({kappa, R, *phi, {}});
      const Potential Wt = levels_potential(trial);
      std::vector<double> ks, start, target;
      double worst_offset = 0;
      for (std::size_t i = 0; i <= m; ++i) {
        const double ki = kappas[i], pi = trial[i].phi;
        const double th = angles_between(Wt, cfg.far, b, {ki}, {far_angle(ki, pi, cfg.far)}, cfg.flow)[0];
        const double off = wrap_half_pi(th - ki * b);
        worst_offset = std::max(worst_offset, std::abs(off));
        ks.push_back(ki);
        start.push_back(ki * a);
        target.push_back(ki * b + off);
      }
      Correction corr;
      corr.order = level;
      corr.budget = budget;
      corr.basis = BumpBasis{a, b, 2 * ks.size()};
      corr.coefficients.assign(corr.basis.size, 0.0);
      if (worst_offset > 1e-15) {
        ShootConfig sc = cfg.shoot;
        sc.budget_order = level;
        sc.epsilon = budget;
        sc.enforce_budget = false;
        sc.flow = refined(cfg.flow);
        const ShootResult sr = shoot_rotation(a, b, ks, start, target, sc);
        corr.basis = sr.basis;
        corr.coefficients = sr.coefficients;
        corr.cn_norm = sr.cn_norm;
        corr.shoot_residual = sr.residual;
        corr.iterations = sr.iterations;
      }
      if (cfg.enforce_budget && corr.cn_norm > budget) {
        why += "; correction C^" + std::to_string(level) + " norm " + std::to_string(corr.cn_norm) +
               " over budget at R = " + std::to_string(R);
        continue;
      }
      trial.back().corr = corr;

      // Eigenfunctions of W_m and the stability of earlier levels.
      const Potential Wm = levels_potential(trial);
      std::vector<Eigenfunction> efs;
      for (std::size_t i = 0; i <= m; ++i)
        efs.push_back(to_eigenfunction(decaying_solution(Wm, kappas[i], trial[i].phi, cfg.far, cfg.sample_step, cfg.flow),
                                       kappas[i]));
      std::vector<double> stab, stab_linear;
      bool stable = true;
      for (std::size_t i = 0; i < m; ++i) {
        stab.push_back(difference_norm(efs[i], out.eigenfunctions[i], cfg.measure_extent, 2));
        stab_linear.push_back(difference_norm(efs[i], out.eigenfunctions[i], cfg.measure_extent, 1));
        stable = stable && (cfg.stability_power == 1 ? stab_linear.back() : stab.back()) <= stability_bound;
      }
      if (cfg.require_stability && !stable) {
        const auto& used = cfg.stability_power == 1 ? stab_linear : stab;
        why += "; stability " + std::to_string(*std::max_element(used.begin(), used.end())) + " > " +
               std::to_string(stability_bound) + " at R = " + std::to_string(R);
        continue;
      }

      built = std::move(trial);
      out.eigenfunctions = std::move(efs);
      out.plan.kappas.push_back(kappa);
      out.plan.R.push_back(R);
      out.plan.R_floor.push_back(floor);
      out.plan.phases.push_back(*phi);
      out.plan.corrections.push_back(corr);
      out.plan.phase_mismatch.push_back(residual_mismatch);
      out.plan.doublings.push_back(d);
      out.plan.stability.push_back(stab);
      out.plan.stability_linear.push_back(stab_linear);
      accepted = true;
    }
    if (!accepted)
      throw NonConvergence("build_embedded: level " + std::to_string(level) + " (kappa = " + std::to_string(kappa) +
                           ") failed" + why);
  }
  return out;
}

nlohmann::json EmbedReport::to_json() const {
  nlohmann::json j{{"kappa", kappa},
                   {"L", L},
                   {"envelope_exponent", envelope_exponent},
                   {"peaks", peaks},
                   {"tail_l2_fraction", tail_l2_fraction},
                   {"classification", embedded ? "embedded" : "not embedded"},
                   {"fitted_phase", fitted_phase},
                   {"fit_misfit", fit_misfit}};
  if (misfit_shifted_phase) j["misfit_sin_kx_plus_half_phi"] = *misfit_shifted_phase;
  if (misfit_literal) j["misfit_sin_k_plus_half_phi_times_x"] = *misfit_literal;
  if (phase_offset) j["phase_offset_vs_half_phi"] = *phase_offset;
  return j;
}

EmbedReport verify_embedded(const Potential& W, double kappa, double L, std::optional<double> phi,
                            const FlowOptions& opts) {
  require(kappa > 0, "verify_embedded needs kappa > 0");
  require(L > 8 * kInner, "verify_embedded needs L > 8");
  EmbedReport r;
  r.kappa = kappa;
  r.L = L;
  const double step = 0.02;
  FlowOptions inner = refined(opts), outer = opts;
  inner.samples = static_cast<std::size_t>(std::ceil(kInner / step)) + 1;
  inner.logA0 = -std::log(kappa);  // u'(0) = kappa A(0) = 1
  const auto a = prufer_flow(W, 0.0, kInner, kappa, 0.0, inner);
  outer.samples = static_cast<std::size_t>(std::ceil((L - kInner) / step)) + 1;
  outer.logA0 = a.logA.back();
  const auto b = prufer_flow(W, kInner, L, kappa, a.phi.back(), outer);
  std::vector<double> x = a.x, logA = a.logA, ph = a.phi;
  x.insert(x.end(), b.x.begin() + 1, b.x.end());
  logA.insert(logA.end(), b.logA.begin() + 1, b.logA.end());
  ph.insert(ph.end(), b.phi.begin() + 1, b.phi.end());
  for (double v : logA)
    if (!std::isfinite(v))
      throw ResolutionError("verify_embedded: amplitude overflow; rescale by integrating log A over shorter pieces");
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) u[i] = std::exp(logA[i]) * std::sin(ph[i]);

  // Envelope: local maxima of |u| beyond L/10.
  std::vector<double> lx, lp;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] < 0.1 * L) continue;
    const double v = std::abs(u[i]);
    if (v > std::abs(u[i - 1]) && v >= std::abs(u[i + 1]) && v > 0) {
      lx.push_back(std::log(x[i]));
      lp.push_back(std::log(v));
    }
  }
  r.peaks = lx.size();
  if (lx.size() < 2) throw ResolutionError("verify_embedded: fewer than two envelope peaks");
  r.envelope_exponent = regression_slope(lx, lp);
  r.embedded = r.envelope_exponent < -0.5;

  double total = 0, tail = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double seg = 0.5 * (u[i] * u[i] + u[i - 1] * u[i - 1]) * (x[i] - x[i - 1]);
    total += seg;
    if (x[i - 1] >= 0.5 * L) tail += seg;
  }
  r.tail_l2_fraction = total > 0 ? tail / total : 0.0;

  // (1 + x) u against sinusoids on [L/4, L].
  double ss = 0, sc = 0, cc = 0, ys = 0, yc = 0, yy = 0;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0.25 * L) continue;
    idx.push_back(i);
    const double y = (1 + x[i]) * u[i], s = std::sin(kappa * x[i]), c = std::cos(kappa * x[i]);
    ss += s * s;
    sc += s * c;
    cc += c * c;
    ys += y * s;
    yc += y * c;
    yy += y * y;
  }
  const double det = ss * cc - sc * sc;
  const double al = (ys * cc - yc * sc) / det, be = (yc * ss - ys * sc) / det;
  r.fitted_phase = std::fmod(std::atan2(be, al) + 2 * kPi, kPi);
  const double explained = al * ys + be * yc;
  r.fit_misfit = yy > 0 ? std::sqrt(std::max(0.0, yy - explained) / yy) : 0.0;
  if (phi) {
    auto misfit = [&](const std::function<double(double)>& p) {
      double yp = 0, pp = 0;
      for (std::size_t i : idx) {
        const double v = p(x[i]);
        yp += (1 + x[i]) * u[i] * v;
        pp += v * v;
      }
      return std::sqrt(std::max(0.0, yy - yp * yp / pp) / yy);
    };
    r.misfit_shifted_phase = misfit([&](double t) { return std::sin(kappa * t + 0.5 * *phi); });
    r.misfit_literal = misfit([&](double t) { return std::sin((kappa + 0.5 * *phi) * t); });
    r.phase_offset = std::fmod(std::fmod(r.fitted_phase - 0.5 * *phi, kPi) + kPi, kPi);
  }
  return r;
}

nlohmann::json TruncatedCheck::to_json() const {
  return {{"L", L},
          {"N", N},
          {"target", target},
          {"nearest_eigenvalue", nearest},
          {"distance", distance},
          {"overlap", overlap},
          {"odd_defect", odd_defect},
          {"core_fraction", core_fraction}};
}

TruncatedCheck truncated_eigen_check(const EmbeddedBuild& build, std::size_t level, double L, std::size_t N) {
  require(level < build.eigenfunctions.size(), "truncated_eigen_check: no such level");
  const Eigenfunction& ef = build.eigenfunctions[level];
  TruncatedCheck c;
  c.L = L;
  c.N = N;
  c.target = ef.kappa * ef.kappa;
  const auto op = discretize(build.plan.potential(), nullptr, L, N);
  const double half = 0.05 * c.target;
  const EigenBasis basis = solve(op, c.target + half, c.target - half);
  if (basis.count() == 0) throw ResolutionError("truncated_eigen_check: no eigenvalue near the target");
  std::size_t best = 0;
  for (std::size_t j = 1; j < basis.count(); ++j)
    if (std::abs(basis.values[static_cast<Eigen::Index>(j)] - c.target) <
        std::abs(basis.values[static_cast<Eigen::Index>(best)] - c.target))
      best = j;
  c.nearest = basis.values[static_cast<Eigen::Index>(best)];
  c.distance = std::abs(c.nearest - c.target);
  const std::size_t n = op.size();
  double vu = 0, vv = 0, uu = 0, core = 0, sym = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = basis.vector(i, best).real(), u = ef.odd(op.grid[i]);
    vu += v * u;
    vv += v * v;
    uu += u * u;
    if (std::abs(op.grid[i]) <= L / 8) core += v * v;
    const double mirror = basis.vector(n - 1 - i, best).real();
    sym += (v + mirror) * (v + mirror);
  }
  c.overlap = std::abs(vu) / std::sqrt(vv * uu);
  c.odd_defect = std::sqrt(sym / (4 * vv));
  c.core_fraction = core / vv;
  return c;
}

}  // namespace apspec

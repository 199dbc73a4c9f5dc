#include "apspec/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/SVD>

namespace apspec {

namespace {

struct Solved {
  Eigen::VectorXd coef, err;
  double rss = 0.0;
  double condition = 0.0;
};

Solved least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& f) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  Solved out;
  out.condition = s[s.size() - 1] > 0 ? s[0] / s[s.size() - 1] : kInf;
  if (!(out.condition <= kMaxFitCondition)) {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "design matrix condition number %.3g exceeds %.0e; widen the lambda range or "
                  "lower the truncation order",
                  out.condition, kMaxFitCondition);
    throw ResolutionError(buf);
  }
  out.coef = svd.solve(f);
  out.rss = (A * out.coef - f).squaredNorm();
  const Eigen::Index n = A.rows(), p = A.cols();
  const double s2 = n > p ? out.rss / static_cast<double>(n - p) : 0.0;
  const Eigen::MatrixXd V = svd.matrixV();
  out.err.resize(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    double v = 0;
    for (Eigen::Index k = 0; k < p; ++k) v += V(i, k) * V(i, k) / (s[k] * s[k]);
    out.err[i] = std::sqrt(s2 * v);
  }
  return out;
}

Eigen::MatrixXd offdiag_design(const std::vector<double>& lambdas, double d, int J) {
  Eigen::MatrixXd A(static_cast<Eigen::Index>(lambdas.size()), 2 * (J + 1));
  for (std::size_t r = 0; r < lambdas.size(); ++r) {
    const double l = lambdas[r];
    for (int j = 0; j <= J; ++j) {
      const double p = std::pow(l, -j);
      A(static_cast<Eigen::Index>(r), j) = std::cos(l * d) * p;
      A(static_cast<Eigen::Index>(r), J + 1 + j) = std::sin(l * d) * p;
    }
  }
  return A;
}

Eigen::MatrixXd diag_design(const std::vector<double>& lambdas, int J) {
  Eigen::MatrixXd A(static_cast<Eigen::Index>(lambdas.size()), J + 1);
  for (std::size_t r = 0; r < lambdas.size(); ++r)
    for (int j = 0; j <= J; ++j) A(static_cast<Eigen::Index>(r), j) = std::pow(lambdas[r], 1 - j);
  return A;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_grid(const std::vector<double>& lambdas, const std::vector<double>& values,
                std::size_t min_points) {
  require(lambdas.size() == values.size(), "fit: lambda and value counts differ");
  require(lambdas.size() >= min_points,
          "fit needs at least " + std::to_string(min_points) + " lambda points");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    require(lambdas[i] > 0 && std::isfinite(lambdas[i]), "fit needs finite lambda > 0");
    require(std::isfinite(values[i]), "fit values must be finite");
    if (i > 0) require(lambdas[i] > lambdas[i - 1], "fit needs a strictly increasing lambda grid");
  }
}

std::vector<double> real_column(const KernelSamples& samples, std::size_t pair) {
  require(pair < samples.pairs.size(), "fit: pair index out of range");
  std::vector<double> out(samples.lambdas.size());
  for (std::size_t l = 0; l < out.size(); ++l) out[l] = samples.values[l][pair].real();
  return out;
}

}  // namespace

double ExpansionFit::evaluate_truncated(double lambda, int j_max) const {
  double s = 0;
  if (diagonal) {
    for (int j = 0; j <= std::min(j_max, J); ++j) s += a[static_cast<std::size_t>(j)] * std::pow(lambda, 1 - j);
    return s;
  }
  const double d = separation();
  for (int j = 0; j <= std::min(j_max, J); ++j) {
    const double p = std::pow(lambda, -j);
    s += (a[static_cast<std::size_t>(j)] * std::cos(lambda * d) +
          b[static_cast<std::size_t>(j)] * std::sin(lambda * d)) * p;
  }
  return s;
}

double ExpansionFit::evaluate(double lambda) const { return evaluate_truncated(lambda, J); }

double ExpansionFit::leading_constant() const {
  require(!diagonal, "leading_constant applies to off-diagonal fits");
  return b[0] * kPi * separation();
}

nlohmann::json ExpansionFit::to_json() const {
  nlohmann::json j;
  j["kind"] = diagonal ? "diagonal" : "offdiagonal";
  j["x"] = x;
  j["y"] = y;
  j["J"] = J;
  j["lambda_grid"] = lambdas;
  j["lambda_min"] = lambdas.front();
  j["lambda_max"] = lambdas.back();
  j["a"] = a;
  j["a_stderr"] = a_err;
  j["residual_norms"] = residual_norms;
  j["condition"] = condition;
  j["max_condition"] = kMaxFitCondition;
  j["operator_hash"] = operator_hash;
  if (diagonal) {
    j["model"] = "sum_j a_j lambda^(1-j)";
    j["power_convention"] =
        "descending powers lambda^(1-j); the ascending reading lambda^(j+1) diverges";
  } else {
    j["model"] = "cos(lambda d) sum_j a_j lambda^-j + sin(lambda d) sum_j b_j lambda^-j";
    j["b"] = b;
    j["b_stderr"] = b_err;
    j["periods"] = periods;
    const double c = leading_constant();
    j["b0_pi_d"] = c;
    j["b0_convention"] = leading_convention(c);
  }
  return j;
}

ExpansionFit fit_offdiagonal(const std::vector<double>& lambdas, const std::vector<double>& values,
                             double x, double y, int J) {
  require(J >= 0 && J <= 3, "fit_offdiagonal needs 0 <= J <= 3");
  const double d = x - y;
  require(std::abs(d) > 1e-9, "fit_offdiagonal needs x != y");
  check_grid(lambdas, values, static_cast<std::size_t>(2 * (J + 1) + 1));
  ExpansionFit fit;
  fit.x = x;
  fit.y = y;
  fit.J = J;
  fit.lambdas = lambdas;
  fit.values = values;
  fit.periods = (lambdas.back() - lambdas.front()) * std::abs(d) / (2 * kPi);
  if (fit.periods < 3.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "lambda grid spans %.3g oscillation periods at |x - y| = %.3g; at least 3 needed",
                  fit.periods, std::abs(d));
    throw InvalidArgument(buf);
  }
  const Eigen::VectorXd f = to_vector(values);
  for (int j = 0; j <= J; ++j) {
    const Solved s = least_squares(offdiag_design(lambdas, d, j), f);
    fit.residual_norms.push_back(std::sqrt(s.rss));
    if (j < J) continue;
    fit.condition = s.condition;
    for (int i = 0; i <= J; ++i) {
      fit.a.push_back(s.coef[i]);
      fit.b.push_back(s.coef[J + 1 + i]);
      fit.a_err.push_back(s.err[i]);
      fit.b_err.push_back(s.err[J + 1 + i]);
    }
  }
  return fit;
}

ExpansionFit fit_offdiagonal(const KernelSamples& samples, std::size_t pair, int J) {
  const auto [x, y] = samples.pairs.at(pair);
  return fit_offdiagonal(samples.lambdas, real_column(samples, pair), x, y, J);
}

ExpansionFit fit_diagonal(const std::vector<double>& lambdas, const std::vector<double>& values,
                          int J, double x) {
  require(J >= 0 && J <= 3, "fit_diagonal needs 0 <= J <= 3");
  check_grid(lambdas, values, std::max<std::size_t>(10, static_cast<std::size_t>(J + 2)));
  ExpansionFit fit;
  fit.diagonal = true;
  fit.x = fit.y = x;
  fit.J = J;
  fit.lambdas = lambdas;
  fit.values = values;
  const Eigen::VectorXd f = to_vector(values);
  for (int j = 0; j <= J; ++j) {
    const Solved s = least_squares(diag_design(lambdas, j), f);
    fit.residual_norms.push_back(std::sqrt(s.rss));
    if (j < J) continue;
    fit.condition = s.condition;
    for (int i = 0; i <= J; ++i) {
      fit.a.push_back(s.coef[i]);
      fit.a_err.push_back(s.err[i]);
    }
  }
  return fit;
}

ExpansionFit fit_diagonal(const KernelSamples& samples, std::size_t pair, int J) {
  const auto [x, y] = samples.pairs.at(pair);
  require(x == y, "fit_diagonal needs a diagonal pair");
  return fit_diagonal(samples.lambdas, real_column(samples, pair), J, x);
}

nlohmann::json RemainderOrder::to_json() const {
  nlohmann::json j;
  j["saturated"] = saturated;
  j["noise_floor"] = noise_floor;
  j["max_remainder"] = max_remainder;
  if (saturated) {
    j["slope"] = "saturated";
    j["relative_slope"] = "saturated";
  } else {
    j["slope"] = slope;
    j["relative_slope"] = relative_slope;
  }
  return j;
}

RemainderOrder remainder_order(const ExpansionFit& high, int J, double noise_floor) {
  require(J >= 0 && J < high.J, "remainder_order needs 0 <= J < fit order");
  RemainderOrder out;
  double scale = 0;
  for (double v : high.values) scale = std::max(scale, std::abs(v));
  const double rms = high.residual_norms.back() / std::sqrt(static_cast<double>(high.values.size()));
  out.noise_floor = noise_floor >= 0 ? noise_floor : 3.0 * rms + 1e-12 * scale;

  // Envelope of the terms J+1..high.J: the oscillating pair is combined in quadrature.
  std::vector<double> logs, logr;
  for (double l : high.lambdas) {
    double r = 0;
    if (high.diagonal) {
      for (int j = J + 1; j <= high.J; ++j) r += high.a[static_cast<std::size_t>(j)] * std::pow(l, 1 - j);
      r = std::abs(r);
    } else {
      double ca = 0, cb = 0;
      for (int j = J + 1; j <= high.J; ++j) {
        ca += high.a[static_cast<std::size_t>(j)] * std::pow(l, -j);
        cb += high.b[static_cast<std::size_t>(j)] * std::pow(l, -j);
      }
      r = std::hypot(ca, cb);
    }
    out.max_remainder = std::max(out.max_remainder, r);
    if (r > 0) {
      logs.push_back(std::log(l));
      logr.push_back(std::log(r));
    }
  }
  if (out.max_remainder <= out.noise_floor || logs.size() < 2) {
    out.saturated = true;
    out.slope = out.relative_slope = std::nan("");
    return out;
  }
  out.slope = regression_slope(logs, logr);
  out.relative_slope = out.slope - (high.diagonal ? 1.0 : 0.0);
  return out;
}

std::vector<double> midpoint_lambdas(const Eigen::VectorXd& eigenvalues, double lo, double hi) {
  require(lo > 0 && hi > lo, "midpoint_lambdas needs 0 < lo < hi");
  std::vector<double> out;
  for (Eigen::Index j = 0; j + 1 < eigenvalues.size(); ++j) {
    const double mid = 0.5 * (eigenvalues[j] + eigenvalues[j + 1]);
    if (mid <= 0) continue;
    const double l = std::sqrt(mid);
    if (l >= lo && l <= hi) out.push_back(l);
  }
  return out;
}

std::string leading_convention(double constant, double rel_tol) {
  if (std::abs(constant - 1.0) <= rel_tol) return "1";
  if (std::abs(constant - 2.0) <= 2.0 * rel_tol) return "2";
  return "neither";
}

}  // namespace apspec

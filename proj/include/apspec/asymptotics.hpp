#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "apspec/spectral.hpp"

namespace apspec {

/// Fits above this design-matrix condition number are rejected.
inline constexpr double kMaxFitCondition = 1e8;

/// Least-squares fit of the kernel expansion at one (x, y).
///   off-diagonal: cos(lambda d) sum_j a_j lambda^{-j} + sin(lambda d) sum_j b_j lambda^{-j}, d = x - y
///   diagonal:     sum_j a_j lambda^{1-j}   (descending powers; b is empty)
struct ExpansionFit {
  bool diagonal = false;
  double x = 0.0, y = 0.0;
  int J = 0;
  std::vector<double> lambdas;
  std::vector<double> values;
  std::vector<double> a, b;
  std::vector<double> a_err, b_err;     // one standard error
  std::vector<double> residual_norms;   // ||data - fit_j||_2 for j = 0..J
  double condition = 0.0;
  double periods = 0.0;                 // oscillation periods spanned by the lambda grid
  std::string operator_hash;

  double separation() const { return x - y; }
  double evaluate(double lambda) const;
  /// Same model with only the terms of order <= j.
  double evaluate_truncated(double lambda, int j) const;
  /// b_0 * pi * (x - y); the free kernel gives 1.
  double leading_constant() const;
  nlohmann::json to_json() const;
};

ExpansionFit fit_offdiagonal(const std::vector<double>& lambdas, const std::vector<double>& values,
                             double x, double y, int J);
ExpansionFit fit_offdiagonal(const KernelSamples& samples, std::size_t pair, int J);

ExpansionFit fit_diagonal(const std::vector<double>& lambdas, const std::vector<double>& values,
                          int J, double x = 0.0);
ExpansionFit fit_diagonal(const KernelSamples& samples, std::size_t pair, int J);

struct RemainderOrder {
  double slope = 0.0;           // d log R / d log lambda
  double relative_slope = 0.0;  // slope minus the power of the leading term
  bool saturated = false;       // remainder below the noise floor; slopes are NaN
  double noise_floor = 0.0;
  double max_remainder = 0.0;
  nlohmann::json to_json() const;
};

/// Empirical decay of the remainder after the terms of order <= J. The remainder
/// envelope R(lambda) is built from the terms of order J+1..high.J of the higher
/// fit; it is saturated when max R does not exceed noise_floor (default: three
/// times the RMS residual of the higher fit plus 1e-12 of the data scale).
RemainderOrder remainder_order(const ExpansionFit& high, int J, double noise_floor = -1.0);

/// lambda = sqrt((E_j + E_{j+1}) / 2) over consecutive eigenvalues, kept when in [lo, hi].
/// Midpoints keep the eigenvalue staircase from biasing the fits.
std::vector<double> midpoint_lambdas(const Eigen::VectorXd& eigenvalues, double lo, double hi);

/// Which normalization of b_0 pi (x - y) the fit agrees with, within rel_tol: "1", "2" or "neither".
std::string leading_convention(double constant, double rel_tol = 0.05);

}  // namespace apspec

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "apspec/common.hpp"
#include "apspec/family.hpp"
#include "apspec/prufer.hpp"

namespace apspec {

/// Positive rapidly decaying profile f fixing the activation floor R_n >= 1 / f(<kappa_n><n>).
using Majorant = std::function<double(double)>;
/// exp(-s^2 / 8).
double default_majorant(double s);
double activation_floor(double kappa, int n, const Majorant& f);

/// chi(t): 0 for t <= 1, 1 for t >= 2.
double tail_cutoff(double t);

/// x -> 4 kappa chi(|x| / R) sin(2 kappa |x| + phi) / |x| (even in x).
Potential delta_L(double kappa, double R, double phi);
/// e^{2 i kappa x} w_+ + e^{-2 i kappa x} w_- = delta_L; sign = +1 or -1 selects w_{+-2 kappa}.
cplx delta_L_coefficient(double kappa, double R, double phi, int sign, double x);

struct Correction {
  BumpBasis basis;
  std::vector<double> coefficients;
  double cn_norm = 0.0;
  int order = 0;
  double budget = 0.0;
  double shoot_residual = 0.0;
  int iterations = 0;

  double operator()(double x) const { return basis.evaluate(coefficients, std::abs(x)); }
};

struct EmbeddedPlan {
  std::vector<double> kappas;
  std::vector<double> R, R_floor;
  std::vector<double> phases;
  std::vector<Correction> corrections;
  /// Residual Pruefer-angle mismatch after the phase search, per level.
  std::vector<double> phase_mismatch;
  std::vector<int> doublings;
  /// stability[m][i] = |||u_i^{(m)} - u_i^{(m-1)}||| for i < m (level index m from 0).
  std::vector<std::vector<double>> stability;
  /// The same differences with the weight 1 + |x|.
  std::vector<std::vector<double>> stability_linear;

  /// sum_n (delta_L_n + delta_S_n), even in x.
  double W(double x) const;
  Potential potential() const;
  /// w_{+-2 kappa_n} on the grid, plus w_0 = sum delta_S_n when any correction is nonzero.
  CoefficientFamily family(const UniformGrid& x) const;
  nlohmann::json to_json() const;
};

struct EmbedConfig {
  int m_max = 1;
  Majorant majorant = default_majorant;
  /// Backward integrations of the decaying solutions start here.
  double far = 800.0;
  /// R search: start at the floor, double until the level conditions hold.
  int max_doublings = 8;
  double R_limit = 200.0;
  std::size_t phase_scan = 64;
  double phase_tol = 1e-12;
  /// Level conditions: stability of earlier eigenfunctions and the C^m budget of delta_S_m.
  bool require_stability = true;
  /// Weight power of the stability condition; 2 is the construction's norm.
  int stability_power = 2;
  bool enforce_budget = true;
  /// Weighted norms are measured on [0, measure_extent].
  double measure_extent = 400.0;
  double sample_step = 0.02;
  FlowOptions flow = default_flow();
  ShootConfig shoot;

  static FlowOptions default_flow();
};

/// Half-line eigenfunction sampled on [0, extent]; the line version is its odd extension.
struct Eigenfunction {
  double kappa = 0.0;
  std::vector<double> x, u, du;
  double boundary_value = 0.0;  // |u(0)|
  double peak = 0.0;            // max |u|

  double odd(double x_line) const;
};

/// (||(1 + |x|^p) u||_inf + ||(1 + |x|^p) u'||_inf) over the samples; p = 2 is the construction's norm.
double weighted_norm(const std::vector<double>& x, const std::vector<double>& u, const std::vector<double>& du,
                     int power = 2);

/// Solution of -u'' + V u = kappa^2 u decaying like cos(kappa x + phi/2) / (1 + x), integrated
/// backwards from `far` to 0 and returned in ascending x. Below x = 1 the step is refined for
/// the narrow corrections; elsewhere samples are `sample_step` apart.
PruferTrajectory decaying_solution(const Potential& V, double kappa, double phi, double far, double sample_step,
                                   const FlowOptions& opts);

struct EmbeddedBuild {
  EmbeddedPlan plan;
  std::vector<Eigenfunction> eigenfunctions;
  Potential W() const { return plan.potential(); }
};

EmbeddedBuild build_embedded(const std::vector<double>& kappas, const EmbedConfig& cfg = {});

struct EmbedReport {
  double kappa = 0.0, L = 0.0;
  double envelope_exponent = 0.0;
  std::size_t peaks = 0;
  /// int_{L/2}^{L} u^2 / int_0^L u^2.
  double tail_l2_fraction = 0.0;
  bool embedded = false;
  /// Best fit (1 + x) u ~ c sin(kappa x + delta) on [L/4, L]: delta mod pi and relative misfit.
  double fitted_phase = 0.0;
  double fit_misfit = 0.0;
  /// With phi supplied: misfits of sin(kappa x + phi/2) and of sin((kappa + phi/2) x).
  std::optional<double> misfit_shifted_phase, misfit_literal;
  std::optional<double> phase_offset;  // fitted_phase - phi/2 mod pi

  nlohmann::json to_json() const;
};

/// Forward integration from u(0) = 0, u'(0) = 1 on [0, L].
EmbedReport verify_embedded(const Potential& W, double kappa, double L, std::optional<double> phi = std::nullopt,
                            const FlowOptions& opts = EmbedConfig::default_flow());

/// Dirichlet truncation of the even extension to [-L, L]: the eigenvalue nearest kappa^2 and the
/// overlap of its eigenvector with the odd-extended constructed eigenfunction.
struct TruncatedCheck {
  double L = 0.0;
  std::size_t N = 0;
  double target = 0.0, nearest = 0.0, distance = 0.0;
  double overlap = 0.0;       // |<v, u>| / (|v| |u|)
  double odd_defect = 0.0;    // |v(x) + v(-x)| relative
  double core_fraction = 0.0; // mass of v in |x| <= L / 8
  nlohmann::json to_json() const;
};

TruncatedCheck truncated_eigen_check(const EmbeddedBuild& build, std::size_t level, double L, std::size_t N);

}  // namespace apspec

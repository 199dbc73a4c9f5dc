#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "apspec/common.hpp"

namespace apspec {

using Potential = std::function<double(double)>;

/// Solution of -u'' + V u = k^2 u in the form u = A sin(phi), u' = k A cos(phi).
struct PruferTrajectory {
  double k = 1.0;
  std::vector<double> x;
  std::vector<double> phi;   // unwrapped
  std::vector<double> logA;

  /// u and u' recovered from (phi, logA).
  std::vector<double> u() const;
  std::vector<double> du() const;
};

struct FlowOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  std::size_t samples = 201;  // uniform output samples including both ends
  double initial_step = 1e-3;
  /// Step cap; the embedded error estimate is unreliable across steep bumps.
  double max_step = 0.01;
  std::size_t max_steps = 2'000'000;
  double logA0 = 0.0;
};

/// Integrates phi' = k - V sin^2(phi) / k and (log A)' = V sin(2 phi) / (2k) from
/// x = a to x = b (b < a integrates backwards) with adaptive Fehlberg 7(8).
PruferTrajectory prufer_flow(const Potential& V, double a, double b, double k, double theta0,
                             const FlowOptions& opts = {});

/// Final angles phi_i(b) for several wavenumbers sharing one potential.
std::vector<double> prufer_endpoint_angles(const Potential& V, double a, double b,
                                           const std::vector<double>& ks,
                                           const std::vector<double>& theta0,
                                           const FlowOptions& opts = {});

/// Max over interior samples of |-u'' + V u - k^2 u| / max |k^2 u|, with u'' by
/// central differences of the reconstructed u.
double reconstruction_residual(const PruferTrajectory& traj, const Potential& V);

/// Largest jump between adjacent samples divided by step * (k + sup|V| / k).
double continuity_ratio(const PruferTrajectory& traj, double sup_abs_v);

void write_csv(std::ostream& os, const PruferTrajectory& traj);

/// Disjoint C-infinity bumps of unit height splitting (a, b) into equal cells.
struct BumpBasis {
  double a = 0.0;
  double b = 1.0;
  std::size_t size = 0;

  double bump(std::size_t j, double x) const;
  double evaluate(const std::vector<double>& coeffs, double x) const;
};

struct ShootConfig {
  std::size_t basis_size = 0;  // 0 means 2n
  int max_iterations = 20;
  double tolerance = 1e-8;           // max angle error
  double fd_step = 1e-7;             // finite-difference step on coefficients
  int budget_order = 2;              // N of the C^N budget
  double epsilon = kInf;             // C^N budget
  bool enforce_budget = false;       // throw when the budget is exceeded
  Potential background;              // optional potential present on (a, b)
  FlowOptions flow;
};

struct ShootResult {
  BumpBasis basis;
  std::vector<double> coefficients;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;
  double jacobian_condition = 1.0;
  int jacobian_rank = 0;
  double cn_norm = 0.0;
  bool budget_ok = true;
  /// Factor by which the target offsets would have to shrink to meet the budget
  /// at first order (1 when already within budget).
  double feasible_offset_scale = 1.0;
  std::vector<double> final_angles;

  double V(double x) const { return basis.evaluate(coefficients, x); }
  Potential potential() const;
  nlohmann::json to_json() const;
};

/// Analytic first-step Jacobian d phi_i(b) / d c_j = -k_i^{-1} int bump_j sin^2(k_i (x - a) + theta_i).
Eigen::MatrixXd rotation_jacobian(const BumpBasis& basis, const std::vector<double>& ks,
                                  const std::vector<double>& theta_start);

/// Finds V = sum c_j bump_j supported in (a, b) with phi_i(b) = theta_target_i for
/// flows starting at phi_i(a) = theta_start_i.
ShootResult shoot_rotation(double a, double b, const std::vector<double>& ks,
                           const std::vector<double>& theta_start,
                           const std::vector<double>& theta_target, const ShootConfig& cfg = {});

/// sum_{j <= N} sup |V^{(j)}| on a fine grid of (a, b).
double cn_norm(const Potential& V, double a, double b, int N, std::size_t samples = 4001);

}  // namespace apspec

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "apspec/common.hpp"
#include "apspec/family.hpp"
#include "apspec/symbols.hpp"

namespace apspec {

enum class BoundaryConvention { periodic, dirichlet };

/// Dense square realization of an operator on a truncated position grid.
struct MatrixOperator {
  Eigen::MatrixXcd matrix;
  UniformGrid grid;
  BoundaryConvention convention = BoundaryConvention::periodic;
  double h = 1.0;
  bool self_adjoint = false;

  MatrixOperator() = default;
  /// Verifies squareness, finiteness, and ||A - A*||_F <= 1e-10 ||A||_F when claimed.
  MatrixOperator(Eigen::MatrixXcd matrix, UniformGrid grid, BoundaryConvention convention, double h,
                 bool self_adjoint);

  std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
  /// ||A - A*||_F / ||A||_F (0 for the zero matrix).
  double self_adjoint_defect() const;
  /// Same grid, convention and h; flag re-verified.
  MatrixOperator with_matrix(Eigen::MatrixXcd m, bool self_adjoint) const;
};

/// Periodic box [-L/2, L/2) with N nodes; frequencies eta_m = 2 pi m / L, m in [-N/2, N/2).
struct PeriodicBox {
  double length = 4.0 * kPi;
  std::size_t size = 1024;

  UniformGrid x() const { return {-0.5 * length, length / static_cast<double>(size), size}; }
  double frequency_step() const { return 2.0 * kPi / length; }
  /// Frequency of FFT index k.
  double eta(std::size_t k) const;
  /// Sorted semiclassical frequencies h eta_m, the xi grid of every box symbol.
  UniformGrid xi(double h) const;
  /// Nearest box frequency.
  double snap(double theta) const;
  void validate() const;
};

/// sum_m f(x_j, h eta_m) e^{i eta_m (x_j - x_l)} / N, modulated by e^{i theta x_j}.
/// f is sampled on the box xi grid; theta must be a box frequency.
MatrixOperator quantize(const PeriodicBox& box, const GridSymbol& symbol, double theta, double h,
                        bool self_adjoint = false);
/// (hD)^2 by spectral differentiation.
MatrixOperator free_operator(const PeriodicBox& box, double h);
/// Multiplication by a real function sampled on the box grid.
MatrixOperator multiplication_operator(const PeriodicBox& box, const std::vector<double>& values, double h);

/// F M F* with the unitary DFT F_{mj} = e^{-i eta_m x_j} / sqrt(N): rows and columns in FFT order.
Eigen::MatrixXcd to_momentum(const PeriodicBox& box, const Eigen::MatrixXcd& m);
/// Left symbol sigma(x_j, xi) with M = Op_h(sigma) exactly on the box.
GridSymbol left_symbol(const PeriodicBox& box, const Eigen::MatrixXcd& m, double h);
/// Squared Frobenius mass of F M F* per modulation index m = row - col (mod N), indexed m + N/2.
std::vector<double> modulation_mass(const PeriodicBox& box, const Eigen::MatrixXcd& m);

/// Concentric smoothstep cutoffs of one gauge step.
struct GaugeCutoffs {
  /// chi_1(|xi|): 1 on [a/2, 1.5 b], supported in (a/4, 2 b).
  double band_inner_lo = 0.5, band_outer_lo = 0.25, band_inner_hi = 1.5, band_outer_hi = 2.0;
  /// Off-diagonal window in the modulation variable: 0 for |nu| <= lo, 1 for |nu| >= hi.
  double window_lo = 1.0, window_hi = 2.0;
  DivisionCutoffs division = DivisionCutoffs::standard();

  double chi1(double abs_xi, double a, double b) const;
  double window(double nu) const;
  static GaugeCutoffs standard() { return {}; }
};

struct GaugeGenerators {
  /// Keyed by the requested frequency theta.
  std::map<double, GridSymbol> g;
  /// r_theta = (D_x + theta) g_theta - a_theta, rapidly decaying in x.
  std::map<double, GridSymbol> remainder;
  std::map<double, double> snapped;
  std::map<double, double> snap_error;
};

/// g_theta solving (D_x + theta) g_theta = -i w_theta chi_1(|xi|) / (2 xi) modulo r_theta, then
/// symmetrized to g_{-theta} = conj(g_theta). thetas defaults to the nonzero family frequencies.
GaugeGenerators gauge_generator(const CoefficientFamily& W, std::pair<double, double> band, double h,
                                const PeriodicBox& box = {},
                                const GaugeCutoffs& cutoffs = GaugeCutoffs::standard(),
                                std::optional<std::vector<double>> thetas = std::nullopt);

/// sum_{theta} e^{i theta x} Op_h(g_theta), made exactly Hermitian by (G + G*)/2.
MatrixOperator generator_matrix(const PeriodicBox& box, const GaugeGenerators& gens, double h);

/// sum_{k < N} i^k ad_G^k P / k!, nested commutators built iteratively.
MatrixOperator conjugate_truncated(const MatrixOperator& P, const MatrixOperator& G, int N);
/// e^{iG} P e^{-iG} through the eigendecomposition of G.
MatrixOperator conjugate_exact(const MatrixOperator& P, const MatrixOperator& G);
/// Ascending eigenvalues of a self-adjoint realization.
Eigen::VectorXd eigenvalues(const MatrixOperator& A);

/// Operator norm of the windowed modulated content of M restricted to |h eta| in [a, b].
double offdiagonal_band_norm(const PeriodicBox& box, const Eigen::MatrixXcd& m, double h,
                             std::pair<double, double> band,
                             const GaugeCutoffs& cutoffs = GaugeCutoffs::standard());

struct GaugeStepResult {
  std::map<double, GridSymbol> generators;
  std::map<double, double> snap_error;
  std::map<double, double> snapped;
  /// Low-modulation left symbol of (conjugated - P0) / h.
  GridSymbol new_diagonal;
  double residual_offdiag_norm = 0.0;
  double pre_offdiag_norm = 0.0;
  std::pair<double, double> band;
  double h = 0.0;
  int truncation = 3;
  double self_adjoint_defect = 0.0;
  MatrixOperator conjugated;

  nlohmann::json to_json() const;
};

/// P = P0 + h W on the box, conjugated by the truncated series of e^{iG}.
GaugeStepResult gauge_step(const PeriodicBox& box, const CoefficientFamily& W,
                           std::pair<double, double> band, double h, int N_trunc = 3,
                           const GaugeCutoffs& cutoffs = GaugeCutoffs::standard());

}  // namespace apspec

#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "apspec/common.hpp"
#include "apspec/family.hpp"

namespace apspec {

/// Dirichlet finite-difference realization of P = D^2 + W1 D + D W1 + W0 on
/// [-L, L]. The matrix is Hermitian tridiagonal; it is stored as the real
/// symmetric tridiagonal T = Phi^* P Phi with Phi = diag(phase). Phi = I when W1 = 0.
struct DiscretizedOperator {
  double L = 0.0;
  std::size_t N = 0;       // nodes including the two boundary nodes
  UniformGrid grid;        // interior nodes
  std::vector<double> w0, w1;
  Eigen::VectorXd diag;    // P_ii
  Eigen::VectorXcd upper;  // P_{i,i+1}
  Eigen::VectorXd offdiag;  // |P_{i,i+1}|
  Eigen::VectorXcd phase;
  std::string hash;         // FNV-1a of (L, N, w0, w1)

  std::size_t size() const { return grid.size; }
  double dx() const { return grid.step; }
  bool real() const;
  /// Eigenvalues above this (lambda^2 <= 1 / dx^2) are dispersion-dominated.
  double trust_ceiling() const { return 1.0 / (dx() * dx()); }
  Eigen::MatrixXcd dense() const;
  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const;
  double norm_bound() const;  // Gershgorin bound on ||P||
};

/// Real-valued coefficient functions.
DiscretizedOperator discretize(const std::function<double(double)>& W0,
                               const std::function<double(double)>& W1, double L, std::size_t N);
/// Complex-valued evaluators; imaginary parts above 1e-12 relative are rejected.
DiscretizedOperator discretize_sampled(const std::function<cplx(double)>& W0,
                                       const std::function<cplx(double)>& W1, double L,
                                       std::size_t N);
/// W0 from a self-adjoint coefficient family, W1 = 0.
DiscretizedOperator discretize(const CoefficientFamily& W0, double L, std::size_t N);

/// Eigenpairs with eigenvalue <= E_max, ascending, Euclidean-orthonormal columns.
struct EigenBasis {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors_real;  // eigenvectors of the real tridiagonal form
  Eigen::VectorXcd phase;
  UniformGrid grid;
  double ceiling = kInf;  // trust ceiling of the source operator
  double e_max = kInf;

  std::size_t count() const { return static_cast<std::size_t>(values.size()); }
  double weight() const { return grid.step; }
  /// u_j at grid index i.
  cplx vector(std::size_t i, std::size_t j) const {
    return phase[static_cast<Eigen::Index>(i)] *
           vectors_real(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  Eigen::VectorXcd column(std::size_t j) const;
};

/// LAPACK dstevr on the real tridiagonal form, eigenvalues in (E_min, E_max].
EigenBasis solve(const DiscretizedOperator& op, double E_max, double E_min = -kInf);
/// Eigenvalues only, in (E_min, E_max].
Eigen::VectorXd eigenvalues(const DiscretizedOperator& op, double E_max, double E_min = -kInf);
/// Lowest `count` eigenpairs.
EigenBasis solve_lowest(const DiscretizedOperator& op, std::size_t count);

/// Max_j ||P u_j - E_j u_j|| and orthonormality defect of the basis.
std::pair<double, double> basis_defects(const DiscretizedOperator& op, const EigenBasis& basis);

struct KernelSamples {
  std::string quantity = "lambda";  // "E" for smoothed projectors at energy E0
  std::vector<double> lambdas;
  std::vector<std::pair<double, double>> pairs;  // snapped to grid nodes
  /// values[l][p] = e_{lambda_l}(x_p, y_p)
  std::vector<std::vector<cplx>> values;
  double ceiling = kInf;

  /// Max |e(x,y) - conj(e(y,x))| over pairs whose swap is also present.
  double symmetry_defect() const;
  /// Diagonal pairs are nondecreasing along a sorted lambda grid.
  bool diagonal_monotone() const;
  void write_csv(std::ostream& os) const;
};

/// Nearest interior grid index to x.
std::size_t grid_index(const UniformGrid& grid, double x);

/// e_lambda(x,y) = sum_{E_j <= lambda^2} u_j(x) conj(u_j(y)) / dx for each lambda.
KernelSamples projector_kernel(const EigenBasis& basis, const std::vector<double>& lambdas,
                               const std::vector<std::pair<double, double>>& pairs);

/// Same kernel without holding the basis: eigenpairs are computed in index
/// blocks of `block` and only the rows at the requested points are kept.
KernelSamples projector_kernel(const DiscretizedOperator& op, const std::vector<double>& lambdas,
                               const std::vector<std::pair<double, double>>& pairs,
                               std::size_t block = 128);

/// Dense projector onto eigenvalues <= lambda^2 (Euclidean inner product).
Eigen::MatrixXcd projector_matrix(const EigenBasis& basis, double lambda);

/// Counting function N(lambda^2) from dx * sum_x e_lambda(x,x).
double trace_count(const EigenBasis& basis, double lambda);

/// Energy window for the smoothed projector. rho_hat is even, equal to 1 on
/// [-T, T] and supported in (-2T, 2T); psi is 1 on [-psi_inner, psi_inner] and
/// supported in (-psi_outer, psi_outer).
struct WaveConfig {
  double E0 = 1.0;
  double h = 0.05;
  double T = 1.0;
  double psi_inner = 1.5;
  double psi_outer = 2.0;
  double dt = 0.0;              // 0 selects a step from the psi band
  double wrap_tolerance = 1e-4; // allowed relative mass near the boundary
  bool check_wrap = true;

  double rho_hat(double t) const;
  double psi(double s) const;
};

/// Propagator route: (2 pi h)^{-1} int rho_hat(t) e^{itE/h} e^{-itP_h/h} psi(hD) delta_y dt
/// integrated over E <= E0, with P_h = h^2 P propagated by a fourth-order
/// composition of Strang splittings whose kinetic part is exact via DST-I.
KernelSamples smoothed_projector_wave(const DiscretizedOperator& op, const WaveConfig& cfg,
                                      const std::vector<std::pair<double, double>>& pairs);

/// Eigenbasis route: sum_j u_j(x) <u_j, psi(hD) delta_y> F((E0 - h^2 E_j) / h) with
/// F(s) = 1/2 + pi^{-1} int_0^inf rho_hat(t) sin(ts) / t dt by quadrature.
KernelSamples smoothed_projector_eig(const DiscretizedOperator& op, const EigenBasis& basis,
                                     const WaveConfig& cfg,
                                     const std::vector<std::pair<double, double>>& pairs);

/// The mollified step F at s.
double smoothed_step(const WaveConfig& cfg, double s);

/// psi(hD) delta_y on the interior grid, through the discrete sine transform.
Eigen::VectorXcd band_limited_delta(const DiscretizedOperator& op, const WaveConfig& cfg, double y);

/// Orthonormal DST-I of a complex vector (its own inverse).
Eigen::VectorXcd dst1(const Eigen::VectorXcd& v);

void write_binary(std::ostream& os, const EigenBasis& basis);
EigenBasis read_binary_basis(std::istream& is);

/// solve() with a file cache under dir keyed by the operator hash and E_max.
EigenBasis cached_solve(const DiscretizedOperator& op, double E_max, const std::string& dir);

}  // namespace apspec

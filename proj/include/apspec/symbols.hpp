#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "apspec/common.hpp"

namespace apspec {

using SymbolMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// a(x, xi) sampled on a tensor grid; rows index x, columns index xi.
/// order_xi = m and order_x = n give the class S^{m,n}.
class GridSymbol {
 public:
  GridSymbol() = default;
  GridSymbol(UniformGrid x, UniformGrid xi, SymbolMatrix samples, int order_xi = 0, int order_x = 0);

  static GridSymbol from_function(UniformGrid x, UniformGrid xi,
                                  const std::function<cplx(double, double)>& f, int order_xi = 0,
                                  int order_x = 0);
  static GridSymbol zeros_like(const GridSymbol& other);

  const UniformGrid& x() const { return x_; }
  const UniformGrid& xi() const { return xi_; }
  const SymbolMatrix& samples() const { return samples_; }
  SymbolMatrix& samples() { return samples_; }
  int order_xi() const { return m_; }
  int order_x() const { return n_; }
  void set_orders(int order_xi, int order_x) {
    m_ = order_xi;
    n_ = order_x;
  }

  cplx operator()(std::size_t i, std::size_t j) const { return samples_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }
  bool same_grid(const GridSymbol& o) const { return x_ == o.x_ && xi_ == o.xi_; }

  /// d_x^j d_xi^k by central finite differences.
  GridSymbol derivative(int jx, int kxi) const;
  double max_abs() const;

  /// Header: magic, version, x (start, step, size), xi (start, step, size), orders;
  /// payload: row-major complex64 (float32 re, im) pairs.
  void write_binary(std::ostream& os) const;
  static GridSymbol read_binary(std::istream& is);

  /// Full sample dump; rejected above kMaxJsonEntries.
  nlohmann::json to_json() const;
  static GridSymbol from_json(const nlohmann::json& j);
  static constexpr std::size_t kMaxJsonEntries = 1u << 16;

 private:
  UniformGrid x_, xi_;
  SymbolMatrix samples_;
  int m_ = 0, n_ = 0;
};

/// sum_{j <= alpha, k <= beta} max |d_x^j d_xi^k a| <x>^{-n+j} <xi>^{-m+k}.
double seminorm_estimate(const GridSymbol& a, int alpha, int beta);

/// b(x, xi - h theta) by 8-point Lagrange interpolation along xi (exact for degree <= 7).
GridSymbol modulation_shift(const GridSymbol& b, double theta, double h);

/// Cutoffs of the division: chi(t) in frequency (Case |theta| >= 1) and in x
/// (Case |theta| < 1); c_plus/c_minus unit-mass bumps on opposite sides of 0.
struct DivisionCutoffs {
  std::function<double(double)> chi;
  std::function<double(double)> chi_x;
  std::function<double(double)> c_plus;
  std::function<double(double)> c_minus;
  /// Relative size of the tail allowed at the x boundary.
  double tail_tolerance = 1e-8;

  static DivisionCutoffs standard();
};

struct DivisionResult {
  GridSymbol b;
  GridSymbol r;  // (D_x + theta) b - a = r, up to discretization error
  bool fourier_case = false;
  /// Case |theta| < 1: the two bump coefficients at each xi.
  std::vector<cplx> a_plus, a_minus;
};

/// Solves (D_x + theta) b - a = r with r rapidly decaying in x.
DivisionResult divide_modulated(const GridSymbol& a, double theta,
                                const DivisionCutoffs& cutoffs = DivisionCutoffs::standard());

/// (D_x + theta) b as -i e^{-i theta x} d_x(e^{i theta x} b), differenced numerically.
GridSymbol apply_dx_plus_theta(const GridSymbol& b, double theta);

/// max over |x - center| >= X (all xi) of |f|, for each X.
std::vector<double> far_field_profile(const GridSymbol& f, const std::vector<double>& windows,
                                      double center = 0.0);

struct DecayRate {
  double slope = 0.0;  // log-log slope of the far-field profile
  std::size_t used = 0;
  bool saturated = false;  // fewer than two windows above the floor
};

/// Regression of log profile against log window over values above floor.
DecayRate far_field_decay(const std::vector<double>& windows, const std::vector<double>& profile,
                          double floor);

/// {a, b} = d_xi a d_x b - d_xi b d_x a.
GridSymbol poisson_bracket(const GridSymbol& a, const GridSymbol& b);

}  // namespace apspec

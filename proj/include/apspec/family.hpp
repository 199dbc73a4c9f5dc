#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "apspec/common.hpp"

namespace apspec {

/// Seminorm multi-index (m, n, alpha, beta): symbol orders in xi and x, and the
/// number of x- and xi-derivatives controlled.
struct SeminormId {
  int m = 0;
  int n = 0;
  int alpha = 0;
  int beta = 0;

  std::string tag() const;
  bool operator==(const SeminormId&) const = default;
};

/// Perturbation W = sum_theta e^{i theta x} w_theta(x), each w_theta sampled on a
/// common uniform x grid and taken to vanish outside it.
class CoefficientFamily {
 public:
  CoefficientFamily() = default;
  /// decay_order records the x-decay |w_theta(x)| <~ <x>^{-decay_order}.
  explicit CoefficientFamily(UniformGrid x, double decay_order = 0.0);

  static CoefficientFamily from_function(UniformGrid x, const std::vector<double>& thetas,
                                         const std::function<cplx(double, double)>& w,
                                         double decay_order = 0.0);

  void set(double theta, std::vector<cplx> samples);

  const UniformGrid& grid() const { return grid_; }
  double decay_order() const { return decay_order_; }
  bool empty() const { return coeffs_.empty(); }
  std::size_t size() const { return coeffs_.size(); }
  /// Sorted frequencies that carry a coefficient.
  std::vector<double> frequencies() const;
  bool has(double theta) const;
  const std::vector<cplx>& coefficient(double theta) const;

  /// Cubic interpolation of w_theta; 0 outside the grid.
  cplx coefficient_at(double theta, double x) const;
  /// W(x) = sum_theta e^{i theta x} w_theta(x).
  cplx evaluate(double x) const;

  /// w_{-theta} = conj(w_theta) for every theta, to the given absolute tolerance.
  bool is_self_adjoint(double tol = 1e-12) const;

  /// sum_{j <= alpha} sup_x |d_x^j w_theta| <x>^{j - n}; the coefficient does not
  /// depend on xi, so the xi part contributes sup <xi>^{-m} = 1 (m >= 0 required).
  double seminorm(double theta, const SeminormId& id) const;

  void write_binary(std::ostream& os) const;
  static CoefficientFamily read_binary(std::istream& is);

 private:
  std::map<double, std::vector<cplx>>::const_iterator lookup(double theta) const;

  UniformGrid grid_;
  double decay_order_ = 0.0;
  std::map<double, std::vector<cplx>> coeffs_;
};

}  // namespace apspec

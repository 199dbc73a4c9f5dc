#include <doctest.h>

#include <cmath>
#include <sstream>

#include "apspec/symbols.hpp"

using namespace apspec;

namespace {

GridSymbol gaussian(const UniformGrid& x, const UniformGrid& xi, double center = 0, double width = 1) {
  return GridSymbol::from_function(x, xi, [=](double xx, double k) {
    const double s = (xx - center) / width;
    return cplx(std::exp(-s * s) * (1.0 + 0.25 * std::exp(-k * k)));
  });
}

double max_diff(const GridSymbol& a, const GridSymbol& b) {
  return (a.samples() - b.samples()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("seminorm examples") {
  const auto x = UniformGrid::linspace(-5, 5, 101);
  const auto xi = UniformGrid::linspace(-200, 200, 4001);
  CHECK(seminorm_estimate(GridSymbol::from_function(x, xi, [](double, double) { return cplx(1); }), 0, 0) ==
        doctest::Approx(1.0));
  const auto lin = GridSymbol::from_function(x, xi, [](double, double k) { return cplx(k); }, 1, 0);
  // Exact value of the defining sum on this grid: max |xi|/<xi> + 1.
  CHECK(seminorm_estimate(lin, 0, 1) == doctest::Approx(200.0 / std::sqrt(1.0 + 200.0 * 200.0) + 1.0).epsilon(1e-12));
  const auto small_xi = UniformGrid::linspace(-5, 5, 101);
  const auto g = GridSymbol::from_function(x, small_xi, [](double a, double b) { return cplx(std::exp(-a * a - b * b)); }, 2, 1);
  CHECK(seminorm_estimate(g, 0, 0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(seminorm_estimate(g, 5, 0), InvalidArgument);
  const auto tiny = GridSymbol::from_function(UniformGrid::linspace(0, 1, 4), small_xi, [](double, double) { return cplx(1); });
  CHECK_THROWS_AS(seminorm_estimate(tiny, 2, 0), ResolutionError);
}

TEST_CASE("modulation shift") {
  const auto x = UniformGrid::linspace(-2, 2, 9);
  const auto xi = UniformGrid::linspace(-4, 4, 161);
  const auto lin = GridSymbol::from_function(x, xi, [](double, double k) { return cplx(k); });
  CHECK(max_diff(modulation_shift(lin, 0.0, 0.1), lin) == 0.0);
  const auto shifted = modulation_shift(lin, 2.0, 0.1);
  const auto expect = GridSymbol::from_function(x, xi, [](double, double k) { return cplx(k - 0.2); });
  CHECK(max_diff(shifted, expect) < 1e-10);
  CHECK_THROWS_AS(modulation_shift(lin, 30.0, 0.1), ResolutionError);
}

TEST_CASE("modulation shift is a group action") {
  const auto x = UniformGrid::linspace(-1, 1, 5);
  const auto xi = UniformGrid::linspace(-8, 8, 1601);
  const auto g = GridSymbol::from_function(x, xi, [](double a, double k) { return cplx(std::exp(-k * k) * (1 + a)); });
  const auto two = modulation_shift(modulation_shift(g, 1.0, 0.13), 2.0, 0.13);
  const auto one = modulation_shift(g, 3.0, 0.13);
  CHECK(max_diff(two, one) < 1e-10);
  const auto exact = GridSymbol::from_function(x, xi, [](double a, double k) {
    const double s = k - 0.39;
    return cplx(std::exp(-s * s) * (1 + a));
  });
  CHECK(max_diff(one, exact) < 1e-10);
}

TEST_CASE("modulation shift seminorm difference bound") {
  // ||b - b_theta||_{alpha,beta} <= ||b||_{alpha,beta+1} h|theta| max_k 2^{|s_k|/2} <h theta>^{|s_k|},
  // s_k = m - k - 1; the weight ratio <xi - t h theta>^s / <xi>^s is bounded by Peetre's inequality.
  const auto x = UniformGrid::linspace(-6, 6, 241);
  const auto xi = UniformGrid::linspace(-8, 8, 801);
  const auto b = GridSymbol::from_function(x, xi, [](double a, double k) { return cplx(std::exp(-a * a - k * k)); });
  for (double theta : {1.0, 3.0, 10.0}) {
    const double h = 0.1;
    GridSymbol diff(x, xi, b.samples() - modulation_shift(b, theta, h).samples(), -1, 0);
    for (int beta = 0; beta <= 1; ++beta) {
      const double lhs = seminorm_estimate(diff, 0, beta);
      double peetre = 0;
      for (int k = 0; k <= beta; ++k) {
        const double sk = std::abs(0.0 - k - 1);
        peetre = std::max(peetre, std::pow(2.0, sk / 2) * std::pow(bracket(h * theta), sk));
      }
      const double rhs = seminorm_estimate(b, 0, beta + 1) * h * std::abs(theta) * peetre;
      CHECK(lhs <= rhs);
    }
  }
}

TEST_CASE("divide_modulated zero and theta = 0") {
  const auto x = UniformGrid::linspace(-20, 20, 512);
  const auto xi = UniformGrid::linspace(-1, 1, 3);
  const auto zero = GridSymbol::from_function(x, xi, [](double, double) { return cplx(0); });
  for (double theta : {2.0, 0.5}) {
    const auto d = divide_modulated(zero, theta);
    CHECK(d.b.max_abs() == 0.0);
    CHECK(d.r.max_abs() == 0.0);
  }
  CHECK_THROWS_AS(divide_modulated(gaussian(x, xi), 0.0), InvalidArgument);
  const auto flat = GridSymbol::from_function(x, xi, [](double, double) { return cplx(1); });
  CHECK_THROWS_AS(divide_modulated(flat, 2.0), ResolutionError);
}

TEST_CASE("divide_modulated Case 1 identity and frequency support of r") {
  const auto x = UniformGrid::linspace(-40, 40, 4096);
  const auto xi = UniformGrid::linspace(-1, 1, 3);
  const auto a = gaussian(x, xi);
  const auto d = divide_modulated(a, 2.0);
  CHECK(d.fourier_case);
  const auto lhs = apply_dx_plus_theta(d.b, 2.0);
  CHECK((lhs.samples() - a.samples() - d.r.samples()).cwiseAbs().maxCoeff() < 1e-5);
  // r lives where |eta + theta| < 1: projecting its spectrum outside leaves nothing.
  std::vector<cplx> col(x.size);
  for (std::size_t i = 0; i < x.size; ++i) col[i] = d.r(i, 1);
  double outside = 0, total = 0;
  for (std::size_t k = 0; k < x.size; ++k) {
    const double kk = k < x.size / 2 ? double(k) : double(k) - double(x.size);
    const double eta = 2 * kPi * kk / (double(x.size) * x.step);
    cplx s = 0;
    for (std::size_t i = 0; i < x.size; ++i) s += col[i] * std::exp(cplx(0, -eta * x[i]));
    total += std::norm(s);
    if (std::abs(eta + 2.0) >= 1.0) outside += std::norm(s);
    if (k > 400 && k < x.size - 400) k = x.size - 401;  // far band carries no mass
  }
  CHECK(outside <= 1e-12 * total);
}

TEST_CASE("divide_modulated Case 2 bounded b and fast residual decay") {
  const auto x = UniformGrid::linspace(-60, 60, 8192);
  const auto xi = UniformGrid::linspace(-1, 1, 3);
  const auto a = gaussian(x, xi);
  const auto d = divide_modulated(a, 0.5);
  CHECK_FALSE(d.fourier_case);
  CHECK(d.b.max_abs() < 10.0);
  const auto lhs = apply_dx_plus_theta(d.b, 0.5);
  GridSymbol res(x, xi, lhs.samples() - a.samples());
  const std::vector<double> windows{2, 4, 8, 16, 32};
  const auto prof = far_field_profile(res, windows);
  for (std::size_t i = 0; i < windows.size(); ++i) CHECK(prof[i] <= std::pow(bracket(windows[i]), -4.0));
  // The vanishing moments make b decay too.
  CHECK(far_field_profile(d.b, {20.0})[0] < 1e-8);
}

TEST_CASE("Case 1 residual decays faster than x^-4 in the far field") {
  const auto x = UniformGrid::linspace(-600, 600, 1 << 15);
  const UniformGrid xi{0.0, 1.0, 1};
  const auto a = gaussian(x, xi);
  const auto d = divide_modulated(a, 2.0);
  GridSymbol res(x, xi, apply_dx_plus_theta(d.b, 2.0).samples() - a.samples());
  const std::vector<double> windows{16, 32, 64, 128, 256};
  const auto rate = far_field_decay(windows, far_field_profile(res, windows), 1e-12);
  CHECK_FALSE(rate.saturated);
  CHECK(rate.slope <= -4.0);
}

TEST_CASE("poisson bracket") {
  const auto x = UniformGrid::linspace(-3, 3, 121);
  const auto xi = UniformGrid::linspace(-3, 3, 121);
  const auto p = GridSymbol::from_function(x, xi, [](double, double k) { return cplx(k * k); }, 2, 0);
  const auto xs = GridSymbol::from_function(x, xi, [](double a, double) { return cplx(a); }, 0, 1);
  const auto two_xi = GridSymbol::from_function(x, xi, [](double, double k) { return cplx(2 * k); });
  CHECK(max_diff(poisson_bracket(p, xs), two_xi) < 1e-10);
  CHECK(poisson_bracket(p, p).max_abs() < 1e-12);
  const auto g = GridSymbol::from_function(x, xi, [](double a, double k) { return cplx(std::exp(-a * a - 0.5 * k * k)); });
  const auto expect = GridSymbol::from_function(x, xi, [](double a, double k) {
    return cplx(2 * k * (-2 * a) * std::exp(-a * a - 0.5 * k * k));
  });
  CHECK(max_diff(poisson_bracket(p, g), expect) < 1e-4);
  const auto other = GridSymbol::from_function(UniformGrid::linspace(-3, 3, 50), xi, [](double, double) { return cplx(1); });
  CHECK_THROWS_AS(poisson_bracket(p, other), InvalidArgument);
}

TEST_CASE("binary and json round trips") {
  const auto x = UniformGrid::linspace(-2, 2, 17);
  const auto xi = UniformGrid::linspace(-1, 1, 9);
  const auto g = GridSymbol::from_function(x, xi, [](double a, double k) { return cplx(a, k); }, 1, 2);
  std::stringstream ss;
  g.write_binary(ss);
  const auto back = GridSymbol::read_binary(ss);
  CHECK(back.order_xi() == 1);
  CHECK(back.order_x() == 2);
  CHECK(max_diff(back, g) < 1e-6);
  const auto j = GridSymbol::from_json(g.to_json());
  CHECK(max_diff(j, g) == 0.0);
}

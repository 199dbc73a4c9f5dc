#include <doctest.h>

#include <cmath>
#include <random>

#include "apspec/asymptotics.hpp"
#include "apspec/cutoffs.hpp"

using namespace apspec;

namespace {

std::vector<double> grid(double lo, double hi, std::size_t n) { return UniformGrid::linspace(lo, hi, n).values(); }

double free_kernel(double lambda, double d) { return std::sin(lambda * d) / (kPi * d); }

std::vector<double> synthetic(const std::vector<double>& ls, double d, const std::vector<double>& a,
                              const std::vector<double>& b) {
  std::vector<double> out;
  for (double l : ls) {
    double s = 0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] * std::cos(l * d) + b[j] * std::sin(l * d)) * std::pow(l, -double(j));
    out.push_back(s);
  }
  return out;
}

const double kGolden = 0.5 * (1 + std::sqrt(5.0));

struct Sweep {
  KernelSamples samples;
  std::string hash;
};

// Midpoint lambdas in [5, 25] on a grid fine enough that dispersion stays below the fit noise.
Sweep sweep(const std::function<double(double)>& W0, const std::vector<std::pair<double, double>>& pairs,
            std::size_t N = 24001) {
  const auto op = discretize(W0, nullptr, 20.0, N);
  const auto lambdas = midpoint_lambdas(eigenvalues(op, 26.0 * 26.0), 5.0, 25.0);
  return {projector_kernel(op, lambdas, pairs), op.hash};
}

}  // namespace

TEST_CASE("fit_offdiagonal: analytic free kernel") {
  const auto ls = grid(5, 25, 201);
  const double x = 1.0, y = -1.0;
  std::vector<double> v;
  for (double l : ls) v.push_back(free_kernel(l, x - y));
  for (int J = 0; J <= 2; ++J) {
    const auto fit = fit_offdiagonal(ls, v, x, y, J);
    CHECK(std::abs(fit.a[0]) <= 1e-3 * std::abs(fit.b[0]));
    CHECK(std::abs(fit.leading_constant() - 1.0) <= 0.01);
    CHECK(leading_convention(fit.leading_constant()) == "1");
  }
}

TEST_CASE("fit_offdiagonal and fit_diagonal: recover their own model class") {
  const auto ls = grid(4, 30, 150);
  const std::vector<double> a = {0.02, -0.3, 0.7, 1.1}, b = {0.16, 0.4, -0.9, 0.25};
  const auto fit = fit_offdiagonal(ls, synthetic(ls, 1.7, a, b), 1.2, -0.5, 3);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(std::abs(fit.a[j] - a[j]) <= 1e-8);
    CHECK(std::abs(fit.b[j] - b[j]) <= 1e-8);
  }
  std::vector<double> dv;
  for (double l : ls) dv.push_back(0.3183 * l + 0.2 - 0.5 / l + 2.0 / (l * l));
  const auto dfit = fit_diagonal(ls, dv, 3);
  const std::vector<double> ad = {0.3183, 0.2, -0.5, 2.0};
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(dfit.a[j] - ad[j]) <= 1e-8);
  CHECK(std::abs(dfit.evaluate(7.5) - (0.3183 * 7.5 + 0.2 - 0.5 / 7.5 + 2.0 / 56.25)) <= 1e-10);
}

TEST_CASE("fits: nested residuals, validation and conditioning") {
  const auto ls = grid(5, 25, 120);
  std::vector<double> v;
  for (double l : ls) v.push_back(free_kernel(l, 2.0) + 0.3 * std::cos(2 * l) / l + 0.05 * std::sin(3.1 * l) / (l * l));
  const auto fit = fit_offdiagonal(ls, v, 1.0, -1.0, 3);
  for (std::size_t j = 1; j < fit.residual_norms.size(); ++j) CHECK(fit.residual_norms[j] <= fit.residual_norms[j - 1]);
  CHECK(fit.residual_norms[1] < fit.residual_norms[0]);
  CHECK(fit.condition < kMaxFitCondition);

  CHECK_THROWS_AS(fit_offdiagonal(ls, v, 1.0, -1.0, 4), InvalidArgument);
  CHECK_THROWS_AS(fit_offdiagonal(ls, v, 1.0, 1.0, 1), InvalidArgument);
  CHECK_THROWS_AS(fit_offdiagonal(grid(5, 6, 40), std::vector<double>(40, 0.0), 1.0, 0.0, 1),
                  InvalidArgument);  // fewer than 3 periods
  CHECK_THROWS_AS(fit_diagonal(grid(5, 25, 8), std::vector<double>(8, 1.0), 1), InvalidArgument);
  std::vector<double> narrow = grid(100, 100.5, 12), nv;
  for (double l : narrow) nv.push_back(l / kPi);
  try {
    fit_diagonal(narrow, nv, 3);
    FAIL("expected an ill-conditioned design");
  } catch (const ResolutionError& e) {
    CHECK(std::string(e.what()).find("widen the lambda range") != std::string::npos);
  }
}

TEST_CASE("fits: refitting on sub-grids stays within three standard errors") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 1e-4);
  const auto ls = grid(5, 25, 240);
  const std::vector<double> a = {0.0, 0.2}, b = {1.0 / (2 * kPi), -0.1};
  auto v = synthetic(ls, 2.0, a, b);
  for (double& e : v) e += noise(rng);
  const auto full = fit_offdiagonal(ls, v, 1.0, -1.0, 1);
  // Contiguous windows and a decimation, each keeping at least 2/3 of the points.
  for (int variant = 0; variant < 3; ++variant) {
    std::vector<double> sl, sv;
    for (std::size_t i = 0; i < ls.size(); ++i) {
      const bool keep = variant == 0 ? i < 160 : variant == 1 ? i >= 80 : i % 3 != 0;
      if (keep) {
        sl.push_back(ls[i]);
        sv.push_back(v[i]);
      }
    }
    const auto sub = fit_offdiagonal(sl, sv, 1.0, -1.0, 1);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(std::abs(sub.a[j] - full.a[j]) < 3 * std::max(sub.a_err[j], full.a_err[j]));
      CHECK(std::abs(sub.b[j] - full.b[j]) < 3 * std::max(sub.b_err[j], full.b_err[j]));
    }
  }
}

TEST_CASE("remainder_order: constructed tails and saturation") {
  const auto ls = grid(5, 40, 200);
  for (int J = 0; J <= 2; ++J) {
    std::vector<double> a = {0.0, 0.4, -0.2, 0.0}, b = {0.3, 0.1, 0.5, 0.0};
    a.resize(std::size_t(J + 2));
    b.resize(std::size_t(J + 2));
    a[std::size_t(J + 1)] = 0.8;
    b[std::size_t(J + 1)] = -0.6;
    const auto fit = fit_offdiagonal(ls, synthetic(ls, 1.5, a, b), 1.0, -0.5, J + 1);
    const auto ro = remainder_order(fit, J);
    CHECK_FALSE(ro.saturated);
    CHECK(std::abs(ro.slope + (J + 1)) <= 0.3);
  }
  std::vector<double> v;
  for (double l : ls) v.push_back(free_kernel(l, 2.0));
  const auto free_fit = fit_offdiagonal(ls, v, 1.0, -1.0, 2);
  const auto ro = remainder_order(free_fit, 1);
  CHECK(ro.saturated);
  CHECK(ro.to_json()["slope"] == "saturated");
  CHECK_THROWS_AS(remainder_order(free_fit, 2), InvalidArgument);

  // Diagonal: the remainder after J terms decays like lambda^{-J}, i.e. J + 1 below the leading power.
  std::vector<double> dv;
  for (double l : ls) dv.push_back(l / kPi + 0.3 + 1.5 / l);
  const auto dfit = fit_diagonal(ls, dv, 2);
  const auto dro = remainder_order(dfit, 1);
  CHECK(std::abs(dro.relative_slope + 2.0) <= 0.3);
}

TEST_CASE("fits: diagonal and off-diagonal agree as the separation shrinks") {
  const auto ls = grid(2, 200, 400);
  const double d = 0.1;
  std::vector<double> off, dia;
  for (double l : ls) {
    off.push_back(free_kernel(l, d));
    dia.push_back(l / kPi);
  }
  const auto ofit = fit_offdiagonal(ls, off, d, 0.0, 1);
  const auto dfit = fit_diagonal(ls, dia, 1);
  const double l = 3.0;  // lambda d = 0.3
  CHECK(std::abs(ofit.evaluate(l) - dfit.evaluate(l)) <= 0.05 * dfit.evaluate(l));
}

TEST_CASE("fit_diagonal: Weyl term for free and bump-perturbed operators") {
  const auto bump = [](double x) { return 4.0 * cutoff::plateau(x, 1.0, 2.0); };
  for (const auto& W0 : {std::function<double(double)>(), std::function<double(double)>(bump)}) {
    const auto sw = sweep(W0, {{0.0, 0.0}, {0.5, 0.5}}, 8001);
    for (std::size_t p = 0; p < 2; ++p) {
      const auto fit = fit_diagonal(sw.samples, p, 2);
      CHECK(std::abs(fit.a[0] * kPi - 1.0) <= (W0 ? 0.02 : 0.01));
    }
  }
}

TEST_CASE("fit_offdiagonal: projector sweeps, free and quasi-periodic") {
  const auto W0 = [](double x) { return 0.1 * (std::cos(x) + std::cos(kGolden * x)); };
  const auto free_sw = sweep(nullptr, {{1.0, -1.0}});
  const auto pert_sw = sweep(W0, {{1.0, -1.0}});
  const auto& ls = free_sw.samples.lambdas;
  const auto free_fit = fit_offdiagonal(free_sw.samples, 0, 1);
  const auto pert_fit = fit_offdiagonal(pert_sw.samples, 0, 1);
  CHECK(std::abs(free_fit.leading_constant() - 1.0) <= 0.05);
  CHECK(std::abs(free_fit.a[0]) <= 5e-3 * std::abs(free_fit.b[0]));
  CHECK(std::abs(pert_fit.a[0]) <= std::max(3 * pert_fit.a_err[0], 1e-3 * std::abs(pert_fit.b[0])));
  CHECK(std::abs(pert_fit.b[0] / free_fit.b[0] - 1.0) <= 0.05);
  // J = 0 against J = 1 on the perturbed kernel.
  CHECK(pert_fit.residual_norms[1] < pert_fit.residual_norms[0]);

  auto j = pert_fit.to_json();
  j["operator_hash"] = pert_sw.hash;
  CHECK(j["kind"] == "offdiagonal");
  CHECK(j["b0_convention"] == "1");
  CHECK(j["lambda_grid"].size() == ls.size());
  CHECK(fit_diagonal(ls, std::vector<double>(ls.size(), 1.0), 0).to_json()["power_convention"]
            .get<std::string>()
            .find("descending") != std::string::npos);
}

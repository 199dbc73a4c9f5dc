#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "apspec/spectral.hpp"

using namespace apspec;

namespace {

double gaussian(double x, double s) { return std::exp(-x * x / (2 * s * s)); }

// Independent O(n^2) DST-I.
Eigen::VectorXcd slow_dst(const Eigen::VectorXcd& v) {
  const Eigen::Index n = v.size();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index j = 0; j < n; ++j)
      out[k] += v[j] * std::sin(kPi * double((j + 1) * (k + 1)) / double(n + 1));
  return out * std::sqrt(2.0 / double(n + 1));
}

double free_kernel(double lambda, double d) {
  return d == 0 ? lambda / kPi : std::sin(lambda * d) / (kPi * d);
}

}  // namespace

TEST_CASE("discretize: free Dirichlet eigenvalues converge at second order") {
  const double L = 2 * kPi;
  for (std::size_t N : {129u, 257u, 513u}) {
    const auto op = discretize(nullptr, nullptr, L, N);
    const auto basis = solve_lowest(op, 10);
    for (int j = 1; j <= 10; ++j) {
      const double k = j * kPi / (2 * L);
      const double kdx = k * op.dx();
      // Discrete symbol (2 - 2cos(k dx)) / dx^2 = k^2 (1 - (k dx)^2 / 12 + ...).
      CHECK(std::abs(basis.values[j - 1] - k * k) <= k * k * kdx * kdx / 11.0 + 1e-12);
      CHECK(basis.values[j - 1] ==
            doctest::Approx((2 - 2 * std::cos(kdx)) / (op.dx() * op.dx())).epsilon(1e-10));
    }
  }
}

TEST_CASE("discretize: constant W0 shifts every eigenvalue by exactly its value") {
  const auto a = solve_lowest(discretize(nullptr, nullptr, 10.0, 200), 30);
  const auto b = solve_lowest(discretize([](double) { return 1.0; }, nullptr, 10.0, 200), 30);
  for (Eigen::Index j = 0; j < 30; ++j) CHECK(std::abs(b.values[j] - a.values[j] - 1.0) <= 1e-10);
}

TEST_CASE("discretize: first-order term is exactly self-adjoint") {
  const auto op = discretize(nullptr, [](double x) { return 0.1 * gaussian(x, 1.0); }, 8.0, 160);
  const Eigen::MatrixXcd m = op.dense();
  CHECK((m - m.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * m.cwiseAbs().maxCoeff());
  CHECK_FALSE(op.real());
  // Real tridiagonal similarity against a dense complex Hermitian solver.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  const auto basis = solve(op, kInf);
  REQUIRE(basis.count() == op.size());
  for (Eigen::Index j = 0; j < basis.values.size(); ++j)
    CHECK(std::abs(basis.values[j] - es.eigenvalues()[j]) <= 1e-9 * op.norm_bound());
  const auto [residual, ortho] = basis_defects(op, basis);
  CHECK(residual <= 1e-8 * op.norm_bound());
  CHECK(ortho <= 1e-10);
}

TEST_CASE("discretize: argument validation") {
  CHECK_THROWS_AS(discretize(nullptr, nullptr, 1.0, 32), InvalidArgument);
  CHECK_THROWS_AS(discretize(nullptr, nullptr, -1.0, 100), InvalidArgument);
  CHECK_THROWS_AS(discretize_sampled([](double x) { return cplx(1.0, 0.1 * x); }, nullptr, 5.0, 100),
                  InvalidArgument);
  CHECK_NOTHROW(discretize_sampled([](double) { return cplx(1.0, 0.0); }, nullptr, 5.0, 100));
  CHECK_THROWS_AS(discretize([](double) { return std::nan(""); }, nullptr, 5.0, 100), InvalidArgument);
}

TEST_CASE("discretize: content hash tracks the potential samples") {
  const auto a = discretize(nullptr, nullptr, 5.0, 100);
  const auto b = discretize(nullptr, nullptr, 5.0, 100);
  const auto c = discretize([](double x) { return 1e-9 * x; }, nullptr, 5.0, 100);
  CHECK(a.hash == b.hash);
  CHECK(a.hash != c.hash);
  CHECK(a.hash.size() == 16);
}

TEST_CASE("solve: energy window and basis invariants") {
  const auto op = discretize([](double x) { return 2.0 * gaussian(x, 0.7); }, nullptr, 20.0, 800);
  const auto basis = solve(op, 50.0);
  REQUIRE(basis.count() > 10);
  CHECK(basis.values[basis.values.size() - 1] <= 50.0);
  for (Eigen::Index j = 1; j < basis.values.size(); ++j) CHECK(basis.values[j] > basis.values[j - 1]);
  const auto [residual, ortho] = basis_defects(op, basis);
  CHECK(residual <= 1e-8 * op.norm_bound());
  CHECK(ortho <= 1e-10);
  const auto window = solve(op, 50.0, 10.0);
  CHECK(window.values[0] > 10.0);
  CHECK(window.count() + std::size_t(std::count_if(basis.values.data(), basis.values.data() + basis.values.size(),
                                                   [](double e) { return e <= 10.0; })) ==
        basis.count());
}

TEST_CASE("projector_kernel: free kernel against the closed form") {
  const auto op = discretize(nullptr, nullptr, 100.0, 4000);
  const auto basis = solve(op, 16.0);
  const double lambda = 2.0;
  std::vector<std::pair<double, double>> pairs;
  for (double x : {-7.0, -2.3, 0.0, 3.1, 6.0})
    for (double d = 1.0; d <= 5.0; d += 0.25) pairs.push_back({x, x + d});
  const auto ks = projector_kernel(basis, {lambda}, pairs);
  double err = 0, scale = 0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double d = ks.pairs[p].first - ks.pairs[p].second;
    err = std::max(err, std::abs(ks.values[0][p] - free_kernel(lambda, d)));
    scale = std::max(scale, std::abs(free_kernel(lambda, d)));
    CHECK(std::abs(ks.values[0][p].imag()) == 0.0);
  }
  CHECK(err / scale <= 0.02);

  const auto diag = projector_kernel(basis, {lambda}, {{0.0, 0.0}, {10.0, 10.0}});
  for (const auto& v : diag.values[0]) CHECK(std::abs(v.real() - lambda / kPi) <= 0.02 * lambda / kPi);
}

TEST_CASE("projector_kernel: below the spectrum and above the trust ceiling") {
  const auto op = discretize([](double) { return 3.0; }, nullptr, 10.0, 400);
  const auto basis = solve(op, 100.0);
  const auto ks = projector_kernel(basis, {0.0, 1.5}, {{0.0, 0.0}, {0.5, -1.0}});
  for (const auto& row : ks.values)
    for (const auto& v : row) CHECK(v == cplx(0.0));
  CHECK_THROWS_AS(projector_kernel(basis, {std::sqrt(op.trust_ceiling()) * 1.01}, {{0.0, 0.0}}),
                  ResolutionError);
  CHECK_THROWS_AS(projector_kernel(basis, {11.0}, {{0.0, 0.0}}), ResolutionError);
  try {
    projector_kernel(basis, {1e3}, {{0.0, 0.0}});
  } catch (const ResolutionError& e) {
    CHECK(std::string(e.what()).find("trust ceiling") != std::string::npos);
  }
  CHECK_THROWS_AS(projector_kernel(basis, {1.0}, {{20.0, 0.0}}), InvalidArgument);
}

TEST_CASE("projector: idempotence, trace and kernel invariants") {
  const auto op = discretize([](double x) { return std::cos(x) + 0.5 * std::cos(1.618 * x); },
                             [](double x) { return 0.2 * gaussian(x, 2.0); }, 10.0, 240);
  const auto basis = solve(op, 200.0);
  for (double lambda : {1.0, 3.0, 7.0}) {
    const Eigen::MatrixXcd pi = projector_matrix(basis, lambda);
    CHECK((pi * pi - pi).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((pi - pi.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
  }
  // Trace equals the counting function for lambda^2 between consecutive eigenvalues.
  for (Eigen::Index j = 3; j < 30; j += 5) {
    const double mid = 0.5 * (basis.values[j] + basis.values[j + 1]);
    const double count = trace_count(basis, std::sqrt(mid));
    CHECK(std::abs(count - double(j + 1)) <= 1e-9);
    // And against the kernel route: dx * sum_x e(x, x).
    std::vector<std::pair<double, double>> diag;
    for (std::size_t i = 0; i < op.size(); ++i) diag.push_back({op.grid[i], op.grid[i]});
    const auto ks = projector_kernel(basis, {std::sqrt(mid)}, diag);
    double trace = 0;
    for (const auto& v : ks.values[0]) trace += v.real() * op.dx();
    CHECK(std::abs(trace - double(j + 1)) <= 1e-9);
  }
  std::vector<std::pair<double, double>> pairs;
  for (double x : {-2.0, 0.0, 1.5})
    for (double y : {-2.0, 0.0, 1.5}) pairs.push_back({x, y});
  std::vector<double> lambdas;
  for (double l = 0.5; l <= 11.5; l += 0.37) lambdas.push_back(l);
  const auto ks = projector_kernel(basis, lambdas, pairs);
  CHECK(ks.symmetry_defect() <= 1e-10);
  CHECK(ks.diagonal_monotone());
  bool complex_seen = false;
  for (const auto& row : ks.values)
    for (const auto& v : row) complex_seen = complex_seen || std::abs(v.imag()) > 1e-6;
  CHECK(complex_seen);
}

TEST_CASE("projector: diagonal is invariant under an exact unitary gauge") {
  const auto op = discretize([](double x) { return 0.4 * std::cos(x); },
                             [](double x) { return 0.1 * gaussian(x, 1.5); }, 6.0, 150);
  const Eigen::MatrixXcd P = op.dense();
  Eigen::VectorXcd u(static_cast<Eigen::Index>(op.size()));
  for (std::size_t i = 0; i < op.size(); ++i) u[Eigen::Index(i)] = std::exp(cplx(0, 0.3 * std::sin(op.grid[i])));
  const Eigen::MatrixXcd Q = u.asDiagonal() * P * u.conjugate().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Q);
  const auto basis = solve(op, kInf);
  for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j)
    CHECK(std::abs(es.eigenvalues()[j] - basis.values[j]) <= 1e-9 * op.norm_bound());
  const double lambda = 4.0;
  const Eigen::Index m = std::count_if(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size(),
                                       [&](double e) { return e <= lambda * lambda; });
  const Eigen::MatrixXcd V = es.eigenvectors().leftCols(m);
  const Eigen::MatrixXcd pi_q = V * V.adjoint();
  std::vector<std::pair<double, double>> diag;
  for (std::size_t i = 10; i < op.size(); i += 17) diag.push_back({op.grid[i], op.grid[i]});
  const auto ks = projector_kernel(basis, {lambda}, diag);
  for (std::size_t p = 0; p < diag.size(); ++p) {
    const std::size_t i = grid_index(op.grid, diag[p].first);
    CHECK(std::abs(ks.values[0][p].real() - pi_q(Eigen::Index(i), Eigen::Index(i)).real() / op.dx()) <= 1e-9);
  }
}

TEST_CASE("KernelSamples: CSV layout") {
  const auto op = discretize(nullptr, nullptr, 5.0, 100);
  const auto ks = projector_kernel(solve(op, 20.0), {1.0, 2.0}, {{0.0, 0.0}, {0.0, 1.0}});
  std::ostringstream os;
  ks.write_csv(os);
  const std::string s = os.str();
  CHECK(s.rfind("lambda,x,y,re,im\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 5);
}

TEST_CASE("dst1: matches the direct sum and is an involution") {
  Eigen::VectorXcd v(37);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = cplx(std::sin(0.3 * i * i), std::cos(1.7 * i));
  CHECK((dst1(v) - slow_dst(v)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((dst1(dst1(v)) - v).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("smoothed projector: mollified step") {
  WaveConfig cfg;
  cfg.T = 1.0;
  CHECK(smoothed_step(cfg, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
  // F(s) + F(-s) = 1 and F tends to the Heaviside step.
  for (double s : {0.3, 2.0, 9.0}) CHECK(smoothed_step(cfg, s) + smoothed_step(cfg, -s) == doctest::Approx(1.0).epsilon(1e-12));
  // Compactly supported rho_hat: the tail decays faster than any power, not exponentially.
  CHECK(std::abs(smoothed_step(cfg, 40.0) - 1.0) <= 1e-5);
  CHECK(std::abs(smoothed_step(cfg, -40.0)) <= 1e-5);
  CHECK(std::abs(smoothed_step(cfg, -100.0)) <= 1e-7);
}

TEST_CASE("smoothed projector: propagator route matches the eigenbasis route") {
  WaveConfig cfg;
  cfg.E0 = 1.0;
  cfg.h = 0.05;
  cfg.T = 1.0;
  const std::vector<std::pair<double, double>> pairs = {{0.0, 0.0}, {0.3, 0.0}, {-0.5, 0.5}, {1.0, 0.2}};
  for (double amp : {0.0, 0.5}) {
    CAPTURE(amp);
    const auto op = discretize([&](double x) { return amp * gaussian(x, 1.0); }, nullptr, 12.0, 2401);
    const auto basis = solve(op, 1.5 * std::pow(cfg.psi_outer / cfg.h, 2));
    const auto eig = smoothed_projector_eig(op, basis, cfg, pairs);
    const auto wave = smoothed_projector_wave(op, cfg, pairs);
    double err = 0, scale = 0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      err = std::max(err, std::abs(eig.values[0][p] - wave.values[0][p]));
      scale = std::max(scale, std::abs(eig.values[0][p]));
    }
    CHECK(err / scale <= 1e-4);
    // Near the free diagonal value sqrt(E0) / (h pi) for the unperturbed case.
    if (amp == 0.0) CHECK(std::abs(eig.values[0][0].real() * cfg.h * kPi - 1.0) <= 0.05);
  }
}

TEST_CASE("smoothed projector: energies below the spectrum give zero") {
  WaveConfig cfg;
  cfg.E0 = -5.0;  // (E0 - h^2 E_j) / h <= -100 for every mode
  const auto op = discretize(nullptr, nullptr, 12.0, 2401);
  const auto basis = solve(op, 1.5 * std::pow(cfg.psi_outer / cfg.h, 2));
  const auto eig = smoothed_projector_eig(op, basis, cfg, {{0.0, 0.0}, {0.4, 0.0}});
  const auto wave = smoothed_projector_wave(op, cfg, {{0.0, 0.0}, {0.4, 0.0}});
  for (std::size_t p = 0; p < 2; ++p) {
    CHECK(std::abs(eig.values[0][p]) <= 1e-6);
    CHECK(std::abs(wave.values[0][p] - eig.values[0][p]) <= 1e-8);
  }
}

TEST_CASE("smoothed projector: long windows approach the sharp projector") {
  const auto op = discretize(nullptr, nullptr, 10.0, 1601);
  WaveConfig cfg;
  cfg.h = 0.05;
  cfg.T = 60.0;
  const auto basis = solve(op, 1.5 * std::pow(cfg.psi_outer / cfg.h, 2));
  // E0 halfway between two scaled eigenvalues near 1.
  Eigen::Index j = 0;
  while (cfg.h * cfg.h * basis.values[j + 1] < 1.0) ++j;
  cfg.E0 = 0.5 * cfg.h * cfg.h * (basis.values[j] + basis.values[j + 1]);
  const std::vector<std::pair<double, double>> pairs = {{0.0, 0.0}, {0.7, -0.2}};
  const auto smooth = smoothed_projector_eig(op, basis, cfg, pairs);
  const auto sharp = projector_kernel(basis, {std::sqrt(cfg.E0) / cfg.h}, pairs);
  for (std::size_t p = 0; p < pairs.size(); ++p)
    CHECK(std::abs(smooth.values[0][p] - sharp.values[0][p]) <= 1e-3 * std::abs(sharp.values[0][0]));
}

TEST_CASE("smoothed projector: wraparound and configuration errors") {
  WaveConfig cfg;
  cfg.T = 1.0;
  const auto small = discretize(nullptr, nullptr, 4.0, 801);
  try {
    smoothed_projector_wave(small, cfg, {{0.0, 0.0}});
    FAIL("expected wraparound");
  } catch (const ResolutionError& e) {
    CHECK(std::string(e.what()).find("T = 1") != std::string::npos);
  }
  WaveConfig bad = cfg;
  bad.h = 2.0;
  CHECK_THROWS_AS(smoothed_projector_wave(small, bad, {{0.0, 0.0}}), InvalidArgument);
  const auto gauge = discretize(nullptr, [](double x) { return 0.1 * gaussian(x, 1.0); }, 12.0, 801);
  CHECK_THROWS_AS(smoothed_projector_wave(gauge, cfg, {{0.0, 0.0}}), InvalidArgument);
  const auto coarse = discretize(nullptr, nullptr, 12.0, 801);
  CHECK_THROWS_AS(smoothed_projector_eig(coarse, solve(coarse, 100.0), cfg, {{0.0, 0.0}}), ResolutionError);
}

TEST_CASE("eigenbasis: binary round trip and cache") {
  const auto op = discretize([](double x) { return 0.3 * std::cos(x); }, nullptr, 5.0, 120);
  const auto basis = solve(op, 40.0);
  std::stringstream ss;
  write_binary(ss, basis);
  const auto back = read_binary_basis(ss);
  CHECK(back.values == basis.values);
  CHECK(back.vectors_real == basis.vectors_real);
  CHECK(back.grid == basis.grid);
  std::stringstream junk("XXXX");
  CHECK_THROWS_AS(read_binary_basis(junk), Error);

  const auto dir = std::filesystem::temp_directory_path() / "apspec_basis_cache_test";
  std::filesystem::remove_all(dir);
  const auto first = cached_solve(op, 40.0, dir.string());
  const auto second = cached_solve(op, 40.0, dir.string());
  CHECK(first.values == second.values);
  CHECK(std::distance(std::filesystem::directory_iterator(dir), {}) == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("projector_kernel: streamed blocks match the held basis") {
  const auto op = discretize([](double x) { return 0.5 * std::cos(x); },
                             [](double x) { return 0.1 * gaussian(x, 1.0); }, 8.0, 300);
  const auto basis = solve(op, 120.0);
  const std::vector<double> lambdas = {0.5, 2.0, 6.0, 10.0};
  const std::vector<std::pair<double, double>> pairs = {{0.0, 0.0}, {1.0, -2.0}, {-2.0, 1.0}};
  const auto held = projector_kernel(basis, lambdas, pairs);
  const auto streamed = projector_kernel(op, lambdas, pairs, 7);
  for (std::size_t l = 0; l < lambdas.size(); ++l)
    for (std::size_t p = 0; p < pairs.size(); ++p)
      CHECK(std::abs(held.values[l][p] - streamed.values[l][p]) <= 1e-12);
  const auto ev = eigenvalues(op, 120.0);
  CHECK((ev - basis.values).cwiseAbs().maxCoeff() <= 1e-10);
}

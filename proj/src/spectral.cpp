#include "apspec/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

#include <lapacke.h>
#include <unsupported/Eigen/FFT>

#include "apspec/cutoffs.hpp"

namespace apspec {

namespace {

DiscretizedOperator assemble(double L, std::size_t N, std::vector<double> w0,
                             std::vector<double> w1, const UniformGrid& grid) {
  DiscretizedOperator op;
  op.L = L;
  op.N = N;
  op.grid = grid;
  op.w0 = std::move(w0);
  op.w1 = std::move(w1);
  const std::size_t n = grid.size;
  const double dx = grid.step;
  op.diag.resize(static_cast<Eigen::Index>(n));
  op.upper.resize(static_cast<Eigen::Index>(n - 1));
  op.offdiag.resize(static_cast<Eigen::Index>(n - 1));
  op.phase.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) op.diag[static_cast<Eigen::Index>(i)] = 2.0 / (dx * dx) + op.w0[i];
  // -i(W1 d + d W1) with the product stencil [(W_i + W_{i+1}) u_{i+1} - (W_i + W_{i-1}) u_{i-1}] / 2dx.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const cplx p(-1.0 / (dx * dx), -(op.w1[i] + op.w1[i + 1]) / (2.0 * dx));
    op.upper[static_cast<Eigen::Index>(i)] = p;
    op.offdiag[static_cast<Eigen::Index>(i)] = std::abs(p);
  }
  // phi_{i+1} = phi_i e^{-i arg P_{i,i+1}} makes Phi^* P Phi real with off-diagonal |P_{i,i+1}|.
  op.phase[0] = 1.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const cplx p = op.upper[static_cast<Eigen::Index>(i)];
    op.phase[static_cast<Eigen::Index>(i + 1)] =
        op.phase[static_cast<Eigen::Index>(i)] * std::conj(p) / std::abs(p);
  }
  std::uint64_t h = fnv1a(&L, sizeof L);
  h = fnv1a(&N, sizeof N, h);
  h = fnv1a(op.w0.data(), op.w0.size() * sizeof(double), h);
  h = fnv1a(op.w1.data(), op.w1.size() * sizeof(double), h);
  op.hash = hex64(h);
  return op;
}

UniformGrid interior_grid(double L, std::size_t N) {
  require(N >= 64, "discretize needs N >= 64");
  require(L > 0 && std::isfinite(L), "discretize needs a finite L > 0");
  const double dx = 2.0 * L / static_cast<double>(N - 1);
  return UniformGrid{-L + dx, dx, N - 2};
}

double real_part_checked(cplx v, const char* which, double x) {
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s is not finite at x = %.6g", which, x);
    throw InvalidArgument(buf);
  }
  if (std::abs(v.imag()) > 1e-12 * std::max(1.0, std::abs(v.real()))) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s is not real at x = %.6g (imaginary part %.3g)", which, x,
                  v.imag());
    throw InvalidArgument(buf);
  }
  return v.real();
}

// Number of eigenvalues of the symmetric tridiagonal (d, e) below x (Sturm count).
std::size_t sturm_count(const Eigen::VectorXd& d, const Eigen::VectorXd& e, double x) {
  std::size_t count = 0;
  double q = 1.0;
  const Eigen::Index n = d.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e2 = i > 0 ? e[i - 1] * e[i - 1] : 0.0;
    q = d[i] - x - (i > 0 ? e2 / q : 0.0);
    if (q == 0.0) q = 1e-300;
    if (q < 0) ++count;
  }
  return count;
}

EigenBasis run_dstevr(const DiscretizedOperator& op, lapack_int il, lapack_int iu, double e_max,
                      bool vectors = true) {
  const lapack_int n = static_cast<lapack_int>(op.size());
  EigenBasis basis;
  basis.grid = op.grid;
  basis.phase = op.phase;
  basis.ceiling = op.trust_ceiling();
  basis.e_max = e_max;
  if (iu < il) {
    basis.values.resize(0);
    basis.vectors_real.resize(n, 0);
    return basis;
  }
  Eigen::VectorXd d = op.diag;
  Eigen::VectorXd e(n);
  e.head(n - 1) = op.offdiag;
  e[n - 1] = 0.0;
  const lapack_int m_req = iu - il + 1;
  Eigen::VectorXd w(n);
  Eigen::MatrixXd z(vectors ? n : 1, vectors ? m_req : 1);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(m_req));
  lapack_int m = 0;
  const lapack_int info =
      LAPACKE_dstevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'I', n, d.data(), e.data(), 0.0, 0.0,
                     il, iu, 0.0, &m, w.data(), z.data(), vectors ? n : 1, isuppz.data());
  if (info != 0) throw NonConvergence("dstevr failed with info = " + std::to_string(info));
  basis.values = w.head(m);
  if (vectors) basis.vectors_real = z.leftCols(m);
  return basis;
}

// Index range [il, iu] (1-based) of eigenvalues in (E_min, E_max].
std::pair<lapack_int, lapack_int> index_range(const DiscretizedOperator& op, double E_max,
                                              double E_min) {
  require(!std::isnan(E_max) && !std::isnan(E_min) && E_max > E_min,
          "solve needs E_min < E_max");
  const std::size_t n = op.size();
  const double bound = op.norm_bound();
  const double hi = std::min(E_max, bound + 1.0);
  const double lo = std::max(E_min, -bound - 1.0);
  const std::size_t below_hi =
      hi >= bound + 1.0 ? n : sturm_count(op.diag, op.offdiag, std::nextafter(hi, kInf));
  const std::size_t below_lo =
      lo <= -bound - 1.0 ? 0 : sturm_count(op.diag, op.offdiag, std::nextafter(lo, kInf));
  return {static_cast<lapack_int>(below_lo + 1), static_cast<lapack_int>(below_hi)};
}

void check_lambda(double lam, double ceiling) {
  require(lam >= 0 && std::isfinite(lam), "projector_kernel needs finite lambda >= 0");
  if (lam * lam > ceiling) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "lambda^2 = %.6g exceeds the trust ceiling %.6g of the discretization", lam * lam,
                  ceiling);
    throw ResolutionError(buf);
  }
}

}  // namespace

bool DiscretizedOperator::real() const {
  return std::all_of(w1.begin(), w1.end(), [](double v) { return v == 0.0; });
}

Eigen::MatrixXcd DiscretizedOperator::dense() const {
  const Eigen::Index n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = diag[i];
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    m(i, i + 1) = upper[i];
    m(i + 1, i) = std::conj(upper[i]);
  }
  return m;
}

Eigen::VectorXcd DiscretizedOperator::apply(const Eigen::VectorXcd& v) const {
  const Eigen::Index n = static_cast<Eigen::Index>(size());
  require(v.size() == n, "apply: vector size mismatch");
  Eigen::VectorXcd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cplx s = diag[i] * v[i];
    if (i + 1 < n) s += upper[i] * v[i + 1];
    if (i > 0) s += std::conj(upper[i - 1]) * v[i - 1];
    out[i] = s;
  }
  return out;
}

double DiscretizedOperator::norm_bound() const {
  double best = 0;
  const Eigen::Index n = diag.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    double r = std::abs(diag[i]);
    if (i > 0) r += offdiag[i - 1];
    if (i + 1 < n) r += offdiag[i];
    best = std::max(best, r);
  }
  return best;
}

DiscretizedOperator discretize(const std::function<double(double)>& W0,
                               const std::function<double(double)>& W1, double L, std::size_t N) {
  const UniformGrid g = interior_grid(L, N);
  std::vector<double> w0(g.size), w1(g.size);
  for (std::size_t i = 0; i < g.size; ++i) {
    const double x = g[i];
    w0[i] = W0 ? real_part_checked(W0(x), "W0", x) : 0.0;
    w1[i] = W1 ? real_part_checked(W1(x), "W1", x) : 0.0;
  }
  return assemble(L, N, std::move(w0), std::move(w1), g);
}

DiscretizedOperator discretize_sampled(const std::function<cplx(double)>& W0,
                                       const std::function<cplx(double)>& W1, double L,
                                       std::size_t N) {
  const UniformGrid g = interior_grid(L, N);
  std::vector<double> w0(g.size), w1(g.size);
  for (std::size_t i = 0; i < g.size; ++i) {
    const double x = g[i];
    w0[i] = W0 ? real_part_checked(W0(x), "W0", x) : 0.0;
    w1[i] = W1 ? real_part_checked(W1(x), "W1", x) : 0.0;
  }
  return assemble(L, N, std::move(w0), std::move(w1), g);
}

DiscretizedOperator discretize(const CoefficientFamily& W0, double L, std::size_t N) {
  return discretize_sampled([&](double x) { return W0.evaluate(x); }, nullptr, L, N);
}

Eigen::VectorXcd EigenBasis::column(std::size_t j) const {
  return phase.cwiseProduct(vectors_real.col(static_cast<Eigen::Index>(j)).cast<cplx>());
}

EigenBasis solve(const DiscretizedOperator& op, double E_max, double E_min) {
  // Sturm counts give the index range, so dstevr allocates only the needed columns.
  const auto [il, iu] = index_range(op, E_max, E_min);
  return run_dstevr(op, il, iu, E_max);
}

Eigen::VectorXd eigenvalues(const DiscretizedOperator& op, double E_max, double E_min) {
  const auto [il, iu] = index_range(op, E_max, E_min);
  return run_dstevr(op, il, iu, E_max, false).values;
}

EigenBasis solve_lowest(const DiscretizedOperator& op, std::size_t count) {
  require(count >= 1 && count <= op.size(), "solve_lowest: count out of range");
  EigenBasis basis = run_dstevr(op, 1, static_cast<lapack_int>(count), kInf);
  basis.e_max = basis.values[basis.values.size() - 1];
  return basis;
}

std::pair<double, double> basis_defects(const DiscretizedOperator& op, const EigenBasis& basis) {
  double residual = 0, ortho = 0;
  const Eigen::Index m = basis.vectors_real.cols();
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::VectorXcd u = basis.column(static_cast<std::size_t>(j));
    residual = std::max(residual, (op.apply(u) - basis.values[j] * u).norm());
  }
  if (m > 0) {
    const Eigen::MatrixXd g = basis.vectors_real.transpose() * basis.vectors_real;
    ortho = (g - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
  }
  return {residual, ortho};
}

double KernelSamples::symmetry_defect() const {
  std::map<std::pair<double, double>, std::size_t> index;
  for (std::size_t p = 0; p < pairs.size(); ++p) index[pairs[p]] = p;
  double worst = 0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto it = index.find({pairs[p].second, pairs[p].first});
    if (it == index.end()) continue;
    for (const auto& row : values)
      worst = std::max(worst, std::abs(row[p] - std::conj(row[it->second])));
  }
  return worst;
}

bool KernelSamples::diagonal_monotone() const {
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (pairs[p].first != pairs[p].second) continue;
    for (std::size_t l = 1; l < values.size(); ++l) {
      if (lambdas[l] < lambdas[l - 1]) continue;
      if (values[l][p].real() < values[l - 1][p].real() - 1e-12 * std::abs(values[l - 1][p]))
        return false;
    }
  }
  return true;
}

void KernelSamples::write_csv(std::ostream& os) const {
  os << quantity << ",x,y,re,im\n";
  char buf[160];
  for (std::size_t l = 0; l < lambdas.size(); ++l)
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", lambdas[l],
                    pairs[p].first, pairs[p].second, values[l][p].real(), values[l][p].imag());
      os << buf;
    }
}

std::size_t grid_index(const UniformGrid& grid, double x) {
  require(std::isfinite(x), "grid point must be finite");
  const double s = std::round((x - grid.start) / grid.step);
  if (s < 0 || s > static_cast<double>(grid.size - 1)) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "point %.6g lies outside the interior grid [%.6g, %.6g]", x,
                  grid.start, grid.back());
    throw InvalidArgument(buf);
  }
  return static_cast<std::size_t>(s);
}

KernelSamples projector_kernel(const EigenBasis& basis, const std::vector<double>& lambdas,
                               const std::vector<std::pair<double, double>>& pairs) {
  KernelSamples out;
  out.lambdas = lambdas;
  out.ceiling = basis.ceiling;
  std::vector<std::size_t> limit(lambdas.size());
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    const double lam = lambdas[l];
    check_lambda(lam, basis.ceiling);
    if (lam * lam > basis.e_max) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "lambda^2 = %.6g exceeds the solved range E_max = %.6g",
                    lam * lam, basis.e_max);
      throw ResolutionError(buf);
    }
    limit[l] = static_cast<std::size_t>(
        std::upper_bound(basis.values.data(), basis.values.data() + basis.values.size(), lam * lam) -
        basis.values.data());
  }
  std::vector<std::size_t> order(lambdas.size());
  for (std::size_t l = 0; l < order.size(); ++l) order[l] = l;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return limit[a] < limit[b]; });

  out.values.assign(lambdas.size(), std::vector<cplx>(pairs.size()));
  const double inv_dx = 1.0 / basis.weight();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const std::size_t ix = grid_index(basis.grid, pairs[p].first);
    const std::size_t iy = grid_index(basis.grid, pairs[p].second);
    out.pairs.push_back({basis.grid[ix], basis.grid[iy]});
    const cplx phase = basis.phase[static_cast<Eigen::Index>(ix)] *
                       std::conj(basis.phase[static_cast<Eigen::Index>(iy)]);
    double acc = 0;
    std::size_t j = 0;
    for (std::size_t l : order) {
      for (; j < limit[l]; ++j)
        acc += basis.vectors_real(static_cast<Eigen::Index>(ix), static_cast<Eigen::Index>(j)) *
               basis.vectors_real(static_cast<Eigen::Index>(iy), static_cast<Eigen::Index>(j));
      out.values[l][p] = phase * acc * inv_dx;
    }
  }
  return out;
}

KernelSamples projector_kernel(const DiscretizedOperator& op, const std::vector<double>& lambdas,
                               const std::vector<std::pair<double, double>>& pairs,
                               std::size_t block) {
  require(block >= 1, "projector_kernel needs block >= 1");
  double top = 0;
  for (double lam : lambdas) {
    check_lambda(lam, op.trust_ceiling());
    top = std::max(top, lam * lam);
  }
  KernelSamples out;
  out.lambdas = lambdas;
  out.ceiling = op.trust_ceiling();
  out.values.assign(lambdas.size(), std::vector<cplx>(pairs.size(), 0.0));
  std::vector<std::size_t> ix(pairs.size()), iy(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    ix[p] = grid_index(op.grid, pairs[p].first);
    iy[p] = grid_index(op.grid, pairs[p].second);
    out.pairs.push_back({op.grid[ix[p]], op.grid[iy[p]]});
  }
  const auto [first, last] = index_range(op, top, -kInf);
  const double inv_dx = 1.0 / op.dx();
  for (lapack_int il = first; il <= last; il += static_cast<lapack_int>(block)) {
    const lapack_int iu = std::min(last, il + static_cast<lapack_int>(block) - 1);
    const EigenBasis part = run_dstevr(op, il, iu, top);
    for (Eigen::Index j = 0; j < part.values.size(); ++j) {
      const double E = part.values[j];
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        const double c = part.vectors_real(static_cast<Eigen::Index>(ix[p]), j) *
                         part.vectors_real(static_cast<Eigen::Index>(iy[p]), j) * inv_dx;
        for (std::size_t l = 0; l < lambdas.size(); ++l)
          if (E <= lambdas[l] * lambdas[l]) out.values[l][p] += c;
      }
    }
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const cplx phase = op.phase[static_cast<Eigen::Index>(ix[p])] *
                       std::conj(op.phase[static_cast<Eigen::Index>(iy[p])]);
    for (auto& row : out.values) row[p] *= phase;
  }
  return out;
}

Eigen::MatrixXcd projector_matrix(const EigenBasis& basis, double lambda) {
  const Eigen::Index m = static_cast<Eigen::Index>(
      std::upper_bound(basis.values.data(), basis.values.data() + basis.values.size(),
                       lambda * lambda) -
      basis.values.data());
  Eigen::MatrixXcd v(basis.vectors_real.rows(), m);
  for (Eigen::Index j = 0; j < m; ++j) v.col(j) = basis.column(static_cast<std::size_t>(j));
  return v * v.adjoint();
}

double trace_count(const EigenBasis& basis, double lambda) {
  const Eigen::Index m = static_cast<Eigen::Index>(
      std::upper_bound(basis.values.data(), basis.values.data() + basis.values.size(),
                       lambda * lambda) -
      basis.values.data());
  // dx * sum_x sum_j |u_j(x)|^2 / dx.
  return basis.vectors_real.leftCols(m).squaredNorm();
}

double WaveConfig::rho_hat(double t) const { return cutoff::plateau(t, T, 2.0 * T); }

double WaveConfig::psi(double s) const { return cutoff::plateau(s, psi_inner, psi_outer); }

Eigen::VectorXcd dst1(const Eigen::VectorXcd& v) {
  const std::size_t n = static_cast<std::size_t>(v.size());
  const std::size_t m = 2 * (n + 1);
  std::vector<cplx> ext(m, 0.0), spec;
  for (std::size_t j = 0; j < n; ++j) {
    ext[j + 1] = v[static_cast<Eigen::Index>(j)];
    ext[m - 1 - j] = -v[static_cast<Eigen::Index>(j)];
  }
  Eigen::FFT<double> fft;
  fft.fwd(spec, ext);
  // Y_k = -2i sum_j x_j sin(pi j k / (n + 1)).
  const double scale = std::sqrt(2.0 / static_cast<double>(n + 1));
  Eigen::VectorXcd out(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k)
    out[static_cast<Eigen::Index>(k)] = cplx(0.0, 0.5) * spec[k + 1] * scale;
  return out;
}

namespace {

// Eigenvalues of the Dirichlet second difference, matching dst1 mode order.
Eigen::VectorXd laplacian_symbol(std::size_t n, double dx) {
  Eigen::VectorXd k(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j)
    k[static_cast<Eigen::Index>(j)] =
        (2.0 - 2.0 * std::cos(kPi * static_cast<double>(j + 1) / static_cast<double>(n + 1))) /
        (dx * dx);
  return k;
}

void validate_wave(const WaveConfig& cfg) {
  require(cfg.h > 0 && cfg.h <= 1, "smoothed projector needs h in (0, 1]");
  require(cfg.T > 0 && std::isfinite(cfg.T), "smoothed projector needs finite T > 0");
  require(cfg.psi_inner > 0 && cfg.psi_outer > cfg.psi_inner, "psi band needs 0 < inner < outer");
  require(std::isfinite(cfg.E0), "E0 must be finite");
}

}  // namespace

Eigen::VectorXcd band_limited_delta(const DiscretizedOperator& op, const WaveConfig& cfg, double y) {
  const std::size_t n = op.size();
  const std::size_t iy = grid_index(op.grid, y);
  Eigen::VectorXcd d = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n));
  d[static_cast<Eigen::Index>(iy)] = 1.0 / op.dx();
  Eigen::VectorXcd s = dst1(d);
  const Eigen::VectorXd k = laplacian_symbol(n, op.dx());
  for (Eigen::Index j = 0; j < s.size(); ++j) s[j] *= cfg.psi(cfg.h * std::sqrt(k[j]));
  return dst1(s);
}

double smoothed_step(const WaveConfig& cfg, double s) {
  // Composite Simpson on [0, 2T]; the integrand rho_hat(t) sin(ts)/t tends to s at t = 0.
  const double span = 2.0 * cfg.T;
  const std::size_t panels =
      2 * std::max<std::size_t>(512, static_cast<std::size_t>(std::ceil(16.0 * span * std::abs(s))));
  const double dt = span / static_cast<double>(panels);
  auto f = [&](double t) { return t == 0.0 ? s : cfg.rho_hat(t) * std::sin(t * s) / t; };
  double sum = f(0.0) + f(span);
  for (std::size_t i = 1; i < panels; ++i)
    sum += (i % 2 ? 4.0 : 2.0) * f(dt * static_cast<double>(i));
  return 0.5 + sum * dt / 3.0 / kPi;
}

KernelSamples smoothed_projector_eig(const DiscretizedOperator& op, const EigenBasis& basis,
                                     const WaveConfig& cfg,
                                     const std::vector<std::pair<double, double>>& pairs) {
  validate_wave(cfg);
  // psi(h sqrt(K)) vanishes above (psi_outer / h)^2; W0 shifts the relevant eigenvalues by at most sup|W0|.
  double wmax = 0;
  for (double w : op.w0) wmax = std::max(wmax, std::abs(w));
  const double needed = std::pow(cfg.psi_outer / cfg.h, 2) + wmax;
  if (basis.e_max < needed) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "eigenbasis solved to E_max = %.6g but the psi band needs eigenvalues up to %.6g",
                  basis.e_max, needed);
    throw ResolutionError(buf);
  }
  if (needed > op.trust_ceiling()) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "psi band reaches E = %.6g above the trust ceiling %.6g", needed,
                  op.trust_ceiling());
    throw ResolutionError(buf);
  }
  const Eigen::Index m = basis.values.size();
  Eigen::VectorXd F(m);
  for (Eigen::Index j = 0; j < m; ++j)
    F[j] = smoothed_step(cfg, (cfg.E0 - cfg.h * cfg.h * basis.values[j]) / cfg.h);

  KernelSamples out;
  out.quantity = "E";
  out.lambdas = {cfg.E0};
  out.ceiling = op.trust_ceiling();
  out.values.assign(1, std::vector<cplx>(pairs.size()));
  std::map<double, Eigen::VectorXcd> coeffs;  // <u_j, psi delta_y> per source point
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const std::size_t ix = grid_index(op.grid, pairs[p].first);
    const std::size_t iy = grid_index(op.grid, pairs[p].second);
    const double y = op.grid[iy];
    out.pairs.push_back({op.grid[ix], y});
    auto it = coeffs.find(y);
    if (it == coeffs.end()) {
      const Eigen::VectorXcd src = band_limited_delta(op, cfg, y);
      const Eigen::VectorXcd twisted = basis.phase.conjugate().cwiseProduct(src);
      it = coeffs.emplace(y, basis.vectors_real.transpose().cast<cplx>() * twisted).first;
    }
    cplx acc = 0;
    for (Eigen::Index j = 0; j < m; ++j) acc += basis.vector(ix, static_cast<std::size_t>(j)) * it->second[j] * F[j];
    out.values[0][p] = acc;
  }
  return out;
}

KernelSamples smoothed_projector_wave(const DiscretizedOperator& op, const WaveConfig& cfg,
                                      const std::vector<std::pair<double, double>>& pairs) {
  validate_wave(cfg);
  require(op.real(), "the propagator route supports W1 = 0 only");
  const std::size_t n = op.size();
  const double h = cfg.h;
  const double span = 2.0 * cfg.T;
  // Highest frequency of e^{itE0/h} Phi(t) inside the psi band; the midpoint rule is
  // spectrally accurate for this smooth even integrand once dt resolves it.
  double wmax = 0;
  for (double w : op.w0) wmax = std::max(wmax, std::abs(w));
  const double omega = (cfg.psi_outer * cfg.psi_outer + h * h * wmax + std::abs(cfg.E0)) / h;
  double dt = cfg.dt > 0 ? cfg.dt : 0.2 * kPi / omega;
  const std::size_t steps = static_cast<std::size_t>(std::ceil(span / dt));
  dt = span / static_cast<double>(steps);

  const Eigen::VectorXd K = laplacian_symbol(n, op.dx());
  Eigen::VectorXd W(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) W[static_cast<Eigen::Index>(i)] = op.w0[i];
  const double cbrt2 = std::cbrt(2.0);
  const double w1 = 1.0 / (2.0 - cbrt2), w0 = -cbrt2 / (2.0 - cbrt2);

  // Strang step for e^{-i tau h (K + W0)}.
  auto strang = [&](Eigen::VectorXcd& v, double tau) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] *= std::exp(cplx(0, -0.5 * tau * h * W[i]));
    v = dst1(v);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] *= std::exp(cplx(0, -tau * h * K[i]));
    v = dst1(v);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] *= std::exp(cplx(0, -0.5 * tau * h * W[i]));
  };
  auto yoshida = [&](Eigen::VectorXcd& v, double tau) {
    strang(v, w1 * tau);
    strang(v, w0 * tau);
    strang(v, w1 * tau);
  };

  const std::size_t strip = std::max<std::size_t>(2, n / 20);
  KernelSamples out;
  out.quantity = "E";
  out.lambdas = {cfg.E0};
  out.ceiling = op.trust_ceiling();
  out.values.assign(1, std::vector<cplx>(pairs.size()));

  // Group pairs by source point: one propagation per y.
  std::map<std::size_t, std::vector<std::size_t>> by_source;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const std::size_t ix = grid_index(op.grid, pairs[p].first);
    const std::size_t iy = grid_index(op.grid, pairs[p].second);
    out.pairs.push_back({op.grid[ix], op.grid[iy]});
    by_source[iy].push_back(p);
  }
  for (const auto& [iy, members] : by_source) {
    Eigen::VectorXcd v = band_limited_delta(op, cfg, op.grid[iy]);
    const double peak = v.cwiseAbs().maxCoeff();
    std::vector<std::size_t> rows;
    for (std::size_t p : members) rows.push_back(grid_index(op.grid, out.pairs[p].first));
    std::vector<double> acc(members.size(), 0.0);
    for (std::size_t q = 0; q < members.size(); ++q) acc[q] = 0.5 * v[static_cast<Eigen::Index>(rows[q])].real();
    std::vector<double> integral(members.size(), 0.0);
    yoshida(v, 0.5 * dt);
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = (static_cast<double>(k) + 0.5) * dt;
      const double weight = cfg.rho_hat(t) / t;
      const cplx rot = std::exp(cplx(0, t * cfg.E0 / h));
      for (std::size_t q = 0; q < members.size(); ++q)
        integral[q] += weight * (rot * v[static_cast<Eigen::Index>(rows[q])]).imag();
      if (cfg.check_wrap) {
        const double edge = std::max(v.head(static_cast<Eigen::Index>(strip)).cwiseAbs().maxCoeff(),
                                     v.tail(static_cast<Eigen::Index>(strip)).cwiseAbs().maxCoeff());
        if (edge > cfg.wrap_tolerance * peak) {
          char buf[200];
          std::snprintf(buf, sizeof buf,
                        "wraparound: propagated mass reaches the boundary strip at t = %.4g "
                        "(relative %.3g) for T = %.6g on [-%.6g, %.6g]",
                        t, edge / peak, cfg.T, op.L, op.L);
          throw ResolutionError(buf);
        }
      }
      if (k + 1 < steps) yoshida(v, dt);
    }
    for (std::size_t q = 0; q < members.size(); ++q)
      out.values[0][members[q]] = acc[q] + integral[q] * dt / kPi;
  }
  return out;
}

void write_binary(std::ostream& os, const EigenBasis& basis) {
  auto put = [&](const void* p, std::size_t bytes) { os.write(static_cast<const char*>(p), static_cast<std::streamsize>(bytes)); };
  const char magic[4] = {'A', 'P', 'E', 'B'};
  const std::uint32_t version = 1;
  const std::uint64_t n = static_cast<std::uint64_t>(basis.vectors_real.rows());
  const std::uint64_t m = static_cast<std::uint64_t>(basis.vectors_real.cols());
  put(magic, 4);
  put(&version, sizeof version);
  put(&n, sizeof n);
  put(&m, sizeof m);
  put(&basis.grid.start, sizeof(double));
  put(&basis.grid.step, sizeof(double));
  put(&basis.ceiling, sizeof(double));
  put(&basis.e_max, sizeof(double));
  put(basis.values.data(), m * sizeof(double));
  put(basis.vectors_real.data(), n * m * sizeof(double));
  put(basis.phase.data(), n * sizeof(cplx));
  if (!os) throw Error("failed to write eigenbasis");
}

EigenBasis read_binary_basis(std::istream& is) {
  auto get = [&](void* p, std::size_t bytes) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(bytes));
    if (!is) throw Error("truncated eigenbasis file");
  };
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t n = 0, m = 0;
  get(magic, 4);
  if (std::memcmp(magic, "APEB", 4) != 0) throw Error("not an eigenbasis file");
  get(&version, sizeof version);
  if (version != 1) throw Error("unsupported eigenbasis version " + std::to_string(version));
  get(&n, sizeof n);
  get(&m, sizeof m);
  if (m > n || n > (1u << 26)) throw Error("corrupt eigenbasis dimensions");
  EigenBasis b;
  b.grid.size = n;
  get(&b.grid.start, sizeof(double));
  get(&b.grid.step, sizeof(double));
  get(&b.ceiling, sizeof(double));
  get(&b.e_max, sizeof(double));
  b.values.resize(static_cast<Eigen::Index>(m));
  b.vectors_real.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  b.phase.resize(static_cast<Eigen::Index>(n));
  get(b.values.data(), m * sizeof(double));
  get(b.vectors_real.data(), n * m * sizeof(double));
  get(b.phase.data(), n * sizeof(cplx));
  return b;
}

EigenBasis cached_solve(const DiscretizedOperator& op, double E_max, const std::string& dir) {
  namespace fs = std::filesystem;
  char name[96];
  std::snprintf(name, sizeof name, "basis_%s_%.10g.bin", op.hash.c_str(), E_max);
  const fs::path path = fs::path(dir) / name;
  if (fs::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    EigenBasis b = read_binary_basis(in);
    if (b.grid == op.grid) return b;
  }
  EigenBasis b = solve(op, E_max);
  fs::create_directories(dir);
  std::ofstream os(path, std::ios::binary);
  write_binary(os, b);
  return b;
}

}  // namespace apspec

#include "apspec/gauge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <lapacke.h>
#include <unsupported/Eigen/FFT>

#include "apspec/cutoffs.hpp"

namespace apspec {

namespace {

using Index = Eigen::Index;

double sign_of_index(std::size_t k) { return (k & 1u) ? -1.0 : 1.0; }

void check_square(const Eigen::MatrixXcd& m, std::size_t n, const char* what) {
  require(m.rows() == m.cols() && static_cast<std::size_t>(m.rows()) == n,
          std::string(what) + ": matrix size does not match the box");
}

/// Forward (sign -1, unnormalized) or inverse (sign +1, unnormalized) FFT of every column.
void fft_columns(Eigen::MatrixXcd& m, bool inverse) {
  Eigen::FFT<double> fft;
  const Index n = m.rows();
  std::vector<cplx> in(static_cast<std::size_t>(n)), out;
  for (Index c = 0; c < m.cols(); ++c) {
    for (Index r = 0; r < n; ++r) in[static_cast<std::size_t>(r)] = m(r, c);
    if (inverse) {
      fft.inv(out, in);
      for (Index r = 0; r < n; ++r) m(r, c) = out[static_cast<std::size_t>(r)] * static_cast<double>(n);
    } else {
      fft.fwd(out, in);
      for (Index r = 0; r < n; ++r) m(r, c) = out[static_cast<std::size_t>(r)];
    }
  }
}

/// Eigen-decomposition A = V diag(w) V* of a Hermitian matrix (lower triangle used).
void hermitian_eig(const Eigen::MatrixXcd& a, Eigen::VectorXd& w, Eigen::MatrixXcd* v) {
  Eigen::MatrixXcd work = a;
  const auto n = static_cast<lapack_int>(a.rows());
  w.resize(a.rows());
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, v ? 'V' : 'N', 'L', n,
                                         reinterpret_cast<lapack_complex_double*>(work.data()), n, w.data());
  if (info != 0) throw NonConvergence("zheevd failed with info = " + std::to_string(info));
  if (v) *v = std::move(work);
}

}  // namespace

MatrixOperator::MatrixOperator(Eigen::MatrixXcd m, UniformGrid g, BoundaryConvention c, double h_,
                               bool sa)
    : matrix(std::move(m)), grid(g), convention(c), h(h_), self_adjoint(sa) {
  require(matrix.rows() == matrix.cols(), "MatrixOperator must be square");
  require(grid.size == static_cast<std::size_t>(matrix.rows()), "MatrixOperator grid size mismatch");
  require(h > 0 && std::isfinite(h), "MatrixOperator needs h > 0");
  require(matrix.allFinite(), "MatrixOperator entries must be finite");
  if (self_adjoint && self_adjoint_defect() > 1e-10)
    throw InvalidArgument("matrix claimed self-adjoint but ||A - A*|| exceeds 1e-10 ||A||");
}

double MatrixOperator::self_adjoint_defect() const {
  const double norm = matrix.norm();
  return norm == 0.0 ? 0.0 : (matrix - matrix.adjoint()).norm() / norm;
}

MatrixOperator MatrixOperator::with_matrix(Eigen::MatrixXcd m, bool sa) const {
  return MatrixOperator(std::move(m), grid, convention, h, sa);
}

double PeriodicBox::eta(std::size_t k) const {
  const double m = k < size / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(size);
  return frequency_step() * m;
}

UniformGrid PeriodicBox::xi(double h) const {
  return {-h * frequency_step() * static_cast<double>(size / 2), h * frequency_step(), size};
}

double PeriodicBox::snap(double theta) const {
  return std::round(theta / frequency_step()) * frequency_step();
}

void PeriodicBox::validate() const {
  require(length > 0 && std::isfinite(length), "periodic box needs a positive length");
  require(size >= 16 && size % 2 == 0, "periodic box needs an even number of nodes >= 16");
}

MatrixOperator quantize(const PeriodicBox& box, const GridSymbol& symbol, double theta, double h,
                        bool self_adjoint) {
  box.validate();
  require(h > 0, "quantize needs h > 0");
  const std::size_t n = box.size;
  require(symbol.x() == box.x() && symbol.xi() == box.xi(h), "quantize: symbol is not on the box grid");
  require(std::abs(box.snap(theta) - theta) <= 1e-9 * box.frequency_step(),
          "quantize: theta is not a box frequency");
  const UniformGrid xg = box.x();
  Eigen::MatrixXcd out(static_cast<Index>(n), static_cast<Index>(n));
  Eigen::FFT<double> fft;
  std::vector<cplx> c(n), row;
  for (std::size_t j = 0; j < n; ++j) {
    const double x = xg[j];
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t col = (k + n / 2) % n;  // sorted column of FFT index k
      c[k] = symbol(j, col) * std::exp(cplx(0, box.eta(k) * x)) * sign_of_index(k);
    }
    fft.fwd(row, c);
    const cplx mod = std::exp(cplx(0, theta * x)) / static_cast<double>(n);
    for (std::size_t l = 0; l < n; ++l) out(static_cast<Index>(j), static_cast<Index>(l)) = mod * row[l];
  }
  return MatrixOperator(std::move(out), xg, BoundaryConvention::periodic, h, self_adjoint);
}

MatrixOperator free_operator(const PeriodicBox& box, double h) {
  const auto sym = GridSymbol::from_function(box.x(), box.xi(h), [](double, double xi) { return cplx(xi * xi); }, 2, 0);
  auto op = quantize(box, sym, 0.0, h);
  op.matrix = 0.5 * (op.matrix + op.matrix.adjoint()).eval();
  op.self_adjoint = true;
  return op;
}

MatrixOperator multiplication_operator(const PeriodicBox& box, const std::vector<double>& values, double h) {
  box.validate();
  require(values.size() == box.size, "multiplication operator: sample count mismatch");
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Index>(box.size), static_cast<Index>(box.size));
  for (std::size_t i = 0; i < box.size; ++i) m(static_cast<Index>(i), static_cast<Index>(i)) = values[i];
  return MatrixOperator(std::move(m), box.x(), BoundaryConvention::periodic, h, true);
}

Eigen::MatrixXcd to_momentum(const PeriodicBox& box, const Eigen::MatrixXcd& m) {
  box.validate();
  check_square(m, box.size, "to_momentum");
  const std::size_t n = box.size;
  // F = S D with D the forward DFT and S = diag((-1)^k) / sqrt(N); F M F* = S D M D* S.
  Eigen::MatrixXcd a = m;
  fft_columns(a, false);                 // D M
  Eigen::MatrixXcd t = a.adjoint();      // M* D*
  fft_columns(t, false);                 // D M* D*
  Eigen::MatrixXcd out = t.adjoint();    // D M D*
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      out(static_cast<Index>(r), static_cast<Index>(c)) *= sign_of_index(r) * sign_of_index(c) / static_cast<double>(n);
  return out;
}

GridSymbol left_symbol(const PeriodicBox& box, const Eigen::MatrixXcd& m, double h) {
  box.validate();
  check_square(m, box.size, "left_symbol");
  const std::size_t n = box.size;
  const UniformGrid xg = box.x();
  // Row j against e^{i eta_k x_l}: an inverse DFT of the row.
  Eigen::MatrixXcd t = m.transpose();
  fft_columns(t, true);
  SymbolMatrix s(static_cast<Index>(n), static_cast<Index>(n));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t col = (k + n / 2) % n;
      s(static_cast<Index>(j), static_cast<Index>(col)) =
          t(static_cast<Index>(k), static_cast<Index>(j)) * sign_of_index(k) *
          std::exp(cplx(0, -box.eta(k) * xg[j]));
    }
  return GridSymbol(xg, box.xi(h), std::move(s));
}

std::vector<double> modulation_mass(const PeriodicBox& box, const Eigen::MatrixXcd& m) {
  const Eigen::MatrixXcd mh = to_momentum(box, m);
  const std::size_t n = box.size;
  std::vector<double> mass(n, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      mass[((r + n - c) % n + n / 2) % n] += std::norm(mh(static_cast<Index>(r), static_cast<Index>(c)));
  return mass;
}

double GaugeCutoffs::chi1(double abs_xi, double a, double b) const {
  return cutoff::band(abs_xi, band_outer_lo * a, band_inner_lo * a, band_inner_hi * b, band_outer_hi * b);
}

double GaugeCutoffs::window(double nu) const {
  return cutoff::smooth_step((std::abs(nu) - window_lo) / (window_hi - window_lo));
}

GaugeGenerators gauge_generator(const CoefficientFamily& W, std::pair<double, double> band, double h,
                                const PeriodicBox& box, const GaugeCutoffs& cutoffs,
                                std::optional<std::vector<double>> thetas) {
  const auto [a, b] = band;
  require(a > 0 && b > a, "gauge_generator needs a band 0 < a < b");
  require(h > 0 && std::isfinite(h), "gauge_generator needs h > 0");
  box.validate();
  std::vector<double> ths;
  if (thetas) {
    for (double t : *thetas) {
      require(std::isfinite(t), "gauge_generator: theta must be finite");
      if (t == 0.0) throw InvalidArgument("gauge_generator: theta = 0 carries no modulation to remove");
      ths.push_back(t);
    }
  } else {
    for (double t : W.frequencies())
      if (t != 0.0) ths.push_back(t);
  }
  GaugeGenerators out;
  if (ths.empty()) return out;

  const UniformGrid xg = box.x(), xig = box.xi(h);
  for (double t : ths) {
    const double s = box.snap(t);
    if (s == 0.0) throw ResolutionError("gauge_generator: theta snaps to 0 on this box; enlarge the box");
    std::vector<cplx> w(xg.size);
    if (W.has(t))
      for (std::size_t j = 0; j < xg.size; ++j) w[j] = W.coefficient_at(t, xg[j]);
    SymbolMatrix samples(static_cast<Index>(xg.size), static_cast<Index>(xig.size));
    for (std::size_t c = 0; c < xig.size; ++c) {
      const double xi = xig[c];
      const double chi = xi == 0.0 ? 0.0 : cutoffs.chi1(std::abs(xi), a, b);
      const cplx fac = chi == 0.0 ? cplx{} : cplx(0, -chi / (2.0 * xi));
      for (std::size_t j = 0; j < xg.size; ++j) samples(static_cast<Index>(j), static_cast<Index>(c)) = fac * w[j];
    }
    GridSymbol sym(xg, xig, std::move(samples), -1, 0);
    DivisionResult div = divide_modulated(sym, s, cutoffs.division);
    div.b.set_orders(-1, 0);
    out.g.emplace(t, std::move(div.b));
    out.remainder.emplace(t, std::move(div.r));
    out.snapped[t] = s;
    out.snap_error[t] = std::abs(t - s);
  }

  // g_{-theta} = conj(g_theta): average existing partners, supply missing ones (those solve the
  // equation for the conjugate coefficient conj(w_theta), not for an absent w_{-theta}).
  std::vector<double> keys;
  for (const auto& [t, g] : out.g) keys.push_back(t);
  for (double t : keys) {
    if (t < 0 && out.g.count(-t)) continue;
    GridSymbol& g = out.g.at(t);
    auto partner = out.g.find(-t);
    if (partner != out.g.end()) {
      g.samples() = (0.5 * (g.samples() + partner->second.samples().conjugate())).eval();
      partner->second.samples() = g.samples().conjugate();
      GridSymbol& r = out.remainder.at(t);
      GridSymbol& rp = out.remainder.at(-t);
      // conj of (D + theta) g = a + r reads (D - theta) conj(g) = a_{-theta} - conj(r).
      r.samples() = (0.5 * (r.samples() - rp.samples().conjugate())).eval();
      rp.samples() = -r.samples().conjugate();
    } else {
      GridSymbol gc = g, rc = out.remainder.at(t);
      gc.samples() = g.samples().conjugate();
      rc.samples() = -rc.samples().conjugate();
      out.g.emplace(-t, std::move(gc));
      out.remainder.emplace(-t, std::move(rc));
      out.snapped[-t] = -out.snapped.at(t);
      out.snap_error[-t] = out.snap_error.at(t);
    }
  }
  return out;
}

MatrixOperator generator_matrix(const PeriodicBox& box, const GaugeGenerators& gens, double h) {
  box.validate();
  const auto n = static_cast<Index>(box.size);
  Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& [t, g] : gens.g) G += quantize(box, g, gens.snapped.at(t), h).matrix;
  G = (0.5 * (G + G.adjoint())).eval();
  return MatrixOperator(std::move(G), box.x(), BoundaryConvention::periodic, h, true);
}

MatrixOperator conjugate_truncated(const MatrixOperator& P, const MatrixOperator& G, int N) {
  require(N >= 1, "conjugate_truncated needs N >= 1");
  require(P.size() == G.size(), "conjugate_truncated: size mismatch");
  require(G.self_adjoint, "conjugate_truncated needs a self-adjoint G");
  if (G.self_adjoint_defect() > 1e-10) throw InvalidArgument("G is flagged self-adjoint but is not");
  Eigen::MatrixXcd sum = P.matrix, term = P.matrix;
  for (int k = 1; k < N; ++k) {
    term = (cplx(0, 1.0 / k) * (G.matrix * term - term * G.matrix)).eval();
    sum += term;
  }
  if (P.self_adjoint) sum = (0.5 * (sum + sum.adjoint())).eval();
  return P.with_matrix(std::move(sum), P.self_adjoint);
}

MatrixOperator conjugate_exact(const MatrixOperator& P, const MatrixOperator& G) {
  require(P.size() == G.size(), "conjugate_exact: size mismatch");
  require(G.self_adjoint, "conjugate_exact needs a self-adjoint G");
  Eigen::VectorXd w;
  Eigen::MatrixXcd V;
  hermitian_eig(G.matrix, w, &V);
  Eigen::MatrixXcd Q = V.adjoint() * P.matrix * V;
  for (Index r = 0; r < Q.rows(); ++r)
    for (Index c = 0; c < Q.cols(); ++c) Q(r, c) *= std::exp(cplx(0, w[r] - w[c]));
  Eigen::MatrixXcd out = V * Q * V.adjoint();
  if (P.self_adjoint) out = (0.5 * (out + out.adjoint())).eval();
  return P.with_matrix(std::move(out), P.self_adjoint);
}

Eigen::VectorXd eigenvalues(const MatrixOperator& A) {
  require(A.self_adjoint, "eigenvalues needs a self-adjoint matrix");
  Eigen::VectorXd w;
  hermitian_eig(A.matrix, w, nullptr);
  return w;
}

double offdiagonal_band_norm(const PeriodicBox& box, const Eigen::MatrixXcd& m, double h,
                             std::pair<double, double> band, const GaugeCutoffs& cutoffs) {
  const auto [a, b] = band;
  require(a > 0 && b > a, "offdiagonal_band_norm needs 0 < a < b");
  const Eigen::MatrixXcd mh = to_momentum(box, m);
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < box.size; ++k) {
    const double xi = std::abs(h * box.eta(k));
    if (xi >= a && xi <= b) idx.push_back(k);
  }
  if (idx.empty()) return 0.0;
  const auto nb = static_cast<Index>(idx.size());
  Eigen::MatrixXcd S(nb, nb);
  for (Index r = 0; r < nb; ++r)
    for (Index c = 0; c < nb; ++c) {
      const std::size_t kr = idx[static_cast<std::size_t>(r)], kc = idx[static_cast<std::size_t>(c)];
      S(r, c) = mh(static_cast<Index>(kr), static_cast<Index>(kc)) * cutoffs.window(box.eta(kr) - box.eta(kc));
    }
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(S);
  return svd.singularValues()[0];
}

nlohmann::json GaugeStepResult::to_json() const {
  nlohmann::json j;
  j["h"] = h;
  j["band"] = {band.first, band.second};
  j["truncation"] = truncation;
  j["residual_offdiag_norm"] = residual_offdiag_norm;
  j["pre_offdiag_norm"] = pre_offdiag_norm;
  j["gain"] = pre_offdiag_norm > 0 ? residual_offdiag_norm / pre_offdiag_norm : 0.0;
  j["self_adjoint_defect"] = self_adjoint_defect;
  j["new_diagonal_max_abs"] = new_diagonal.samples().size() ? new_diagonal.max_abs() : 0.0;
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& [t, e] : snap_error) {
    const auto it = snapped.find(t);
    snaps.push_back({{"theta", t}, {"snapped", it == snapped.end() ? t : it->second}, {"snap_error", e}});
  }
  j["snap"] = snaps;
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& [t, g] : generators) gens.push_back({{"theta", t}, {"max_abs", g.max_abs()}});
  j["generators"] = gens;
  return j;
}

GaugeStepResult gauge_step(const PeriodicBox& box, const CoefficientFamily& W, std::pair<double, double> band,
                           double h, int N_trunc, const GaugeCutoffs& cutoffs) {
  box.validate();
  const auto [a, b] = band;
  require(a > 0 && b > a, "gauge_step needs a band 0 < a < b");
  require(h > 0 && std::isfinite(h), "gauge_step needs h > 0");
  require(N_trunc >= 1, "gauge_step needs N_trunc >= 1");
  const double xi_max = h * box.frequency_step() * static_cast<double>(box.size / 2);
  if (cutoffs.band_outer_hi * b > xi_max) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "band cutoff support %.4g exceeds the resolved |xi| <= %.4g", cutoffs.band_outer_hi * b,
                  xi_max);
    throw ResolutionError(buf);
  }
  if (!W.empty()) require(W.is_self_adjoint(1e-10), "gauge_step needs a self-adjoint coefficient family");

  GaugeStepResult out;
  out.band = band;
  out.h = h;
  out.truncation = N_trunc;

  const UniformGrid xg = box.x();
  std::vector<double> wx(box.size, 0.0);
  for (double t : W.frequencies()) {
    const double s = box.snap(t);
    for (std::size_t j = 0; j < box.size; ++j) wx[j] += (std::exp(cplx(0, s * xg[j])) * W.coefficient_at(t, xg[j])).real();
  }
  const MatrixOperator P0 = free_operator(box, h);
  MatrixOperator P = P0.with_matrix(P0.matrix + h * multiplication_operator(box, wx, h).matrix, true);

  GaugeGenerators gens = gauge_generator(W, band, h, box, cutoffs);
  const MatrixOperator G = generator_matrix(box, gens, h);
  out.conjugated = conjugate_truncated(P, G, N_trunc);
  out.pre_offdiag_norm = offdiagonal_band_norm(box, P.matrix, h, band, cutoffs);
  out.residual_offdiag_norm = offdiagonal_band_norm(box, out.conjugated.matrix, h, band, cutoffs);
  out.self_adjoint_defect = out.conjugated.self_adjoint_defect();

  // Q update: keep the modulations below the window of (conjugated - P0) / h.
  GridSymbol q = left_symbol(box, (out.conjugated.matrix - P0.matrix) / h, h);
  Eigen::FFT<double> fft;
  const auto n = static_cast<Index>(box.size);
  std::vector<cplx> col(box.size), spec, back;
  for (Index c = 0; c < n; ++c) {
    for (Index r = 0; r < n; ++r) col[static_cast<std::size_t>(r)] = q.samples()(r, c);
    fft.fwd(spec, col);
    for (std::size_t k = 0; k < box.size; ++k) spec[k] *= 1.0 - cutoffs.window(box.eta(k));
    fft.inv(back, spec);
    for (Index r = 0; r < n; ++r) q.samples()(r, c) = back[static_cast<std::size_t>(r)];
  }
  q.set_orders(1, 0);
  out.new_diagonal = std::move(q);

  out.generators = std::move(gens.g);
  out.snap_error = std::move(gens.snap_error);
  out.snapped = std::move(gens.snapped);
  return out;
}

}  // namespace apspec

#include "apspec/symbols.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include <unsupported/Eigen/FFT>

#include "apspec/cutoffs.hpp"
#include "apspec/fd.hpp"

namespace apspec {

namespace {

constexpr char kMagic[4] = {'A', 'P', 'G', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr int kLagrangePoints = 8;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw InvalidArgument("truncated grid-symbol payload");
  return v;
}

void check_grid(const UniformGrid& g, const char* what) {
  require(g.size >= 1 && g.step > 0 && std::isfinite(g.start) && std::isfinite(g.step),
          std::string(what) + " grid must be strictly increasing and finite");
}

// Column-wise map f(column samples) -> column samples.
template <class F>
SymbolMatrix map_columns(const SymbolMatrix& s, F&& f) {
  SymbolMatrix out(s.rows(), s.cols());
  std::vector<cplx> col(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) col[static_cast<std::size_t>(i)] = s(i, j);
    const std::vector<cplx> res = f(col, j);
    for (Eigen::Index i = 0; i < s.rows(); ++i) out(i, j) = res[static_cast<std::size_t>(i)];
  }
  return out;
}

// Cumulative integral F(x_i) = int_{x_origin}^{x_i} f with a four-point rule per cell.
std::vector<cplx> cumulative_integral(const std::vector<cplx>& f, double dx, std::size_t origin) {
  const std::size_t n = f.size();
  std::vector<cplx> out(n, 0.0);
  auto cell = [&](std::size_t i) {  // int over [x_i, x_{i+1}]
    if (i >= 1 && i + 2 < n)
      return dx / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]);
    return 0.5 * dx * (f[i] + f[i + 1]);
  };
  for (std::size_t i = origin; i + 1 < n; ++i) out[i + 1] = out[i] + cell(i);
  for (std::size_t i = origin; i > 0; --i) out[i - 1] = out[i] - cell(i - 1);
  return out;
}

}  // namespace

GridSymbol::GridSymbol(UniformGrid x, UniformGrid xi, SymbolMatrix samples, int order_xi, int order_x)
    : x_(x), xi_(xi), samples_(std::move(samples)), m_(order_xi), n_(order_x) {
  check_grid(x_, "x");
  check_grid(xi_, "xi");
  require(static_cast<std::size_t>(samples_.rows()) == x_.size &&
              static_cast<std::size_t>(samples_.cols()) == xi_.size,
          "symbol samples must match the grid shape");
  require(samples_.allFinite(), "symbol samples must be finite");
}

GridSymbol GridSymbol::from_function(UniformGrid x, UniformGrid xi,
                                     const std::function<cplx(double, double)>& f, int order_xi,
                                     int order_x) {
  SymbolMatrix s(static_cast<Eigen::Index>(x.size), static_cast<Eigen::Index>(xi.size));
  for (std::size_t i = 0; i < x.size; ++i)
    for (std::size_t j = 0; j < xi.size; ++j)
      s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f(x[i], xi[j]);
  return GridSymbol(x, xi, std::move(s), order_xi, order_x);
}

GridSymbol GridSymbol::zeros_like(const GridSymbol& other) {
  return GridSymbol(other.x_, other.xi_,
                    SymbolMatrix::Zero(other.samples_.rows(), other.samples_.cols()), other.m_,
                    other.n_);
}

GridSymbol GridSymbol::derivative(int jx, int kxi) const {
  SymbolMatrix tmp(samples_.rows(), samples_.cols());
  const auto nx = samples_.rows(), nxi = samples_.cols();
  for (Eigen::Index j = 0; j < nxi; ++j)
    fd::derivative(samples_.data() + j, static_cast<std::size_t>(nx), nxi, x_.step, jx,
                   tmp.data() + j, nxi);
  SymbolMatrix out(nx, nxi);
  for (Eigen::Index i = 0; i < nx; ++i)
    fd::derivative(tmp.data() + i * nxi, static_cast<std::size_t>(nxi), 1, xi_.step, kxi,
                   out.data() + i * nxi, 1);
  return GridSymbol(x_, xi_, std::move(out), m_ - kxi, n_ - jx);
}

double GridSymbol::max_abs() const { return samples_.size() ? samples_.cwiseAbs().maxCoeff() : 0.0; }

void GridSymbol::write_binary(std::ostream& os) const {
  os.write(kMagic, 4);
  put(os, kVersion);
  for (const auto* g : {&x_, &xi_}) {
    put(os, g->start);
    put(os, g->step);
    put(os, static_cast<std::uint64_t>(g->size));
  }
  put(os, static_cast<std::int32_t>(m_));
  put(os, static_cast<std::int32_t>(n_));
  std::vector<float> payload(2 * static_cast<std::size_t>(samples_.size()));
  for (Eigen::Index k = 0; k < samples_.size(); ++k) {
    payload[2 * static_cast<std::size_t>(k)] = static_cast<float>(samples_.data()[k].real());
    payload[2 * static_cast<std::size_t>(k) + 1] = static_cast<float>(samples_.data()[k].imag());
  }
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size() * sizeof(float)));
}

GridSymbol GridSymbol::read_binary(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw InvalidArgument("not a grid-symbol payload");
  if (get<std::uint32_t>(is) != kVersion) throw InvalidArgument("unsupported payload version");
  UniformGrid g[2];
  for (auto& grid : g) {
    grid.start = get<double>(is);
    grid.step = get<double>(is);
    grid.size = static_cast<std::size_t>(get<std::uint64_t>(is));
  }
  const int m = get<std::int32_t>(is), n = get<std::int32_t>(is);
  std::vector<float> payload(2 * g[0].size * g[1].size);
  is.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!is) throw InvalidArgument("truncated grid-symbol payload");
  SymbolMatrix s(static_cast<Eigen::Index>(g[0].size), static_cast<Eigen::Index>(g[1].size));
  for (Eigen::Index k = 0; k < s.size(); ++k)
    s.data()[k] = cplx(payload[2 * static_cast<std::size_t>(k)], payload[2 * static_cast<std::size_t>(k) + 1]);
  return GridSymbol(g[0], g[1], std::move(s), m, n);
}

nlohmann::json GridSymbol::to_json() const {
  require(static_cast<std::size_t>(samples_.size()) <= kMaxJsonEntries,
          "grid too large for JSON; use the binary layout");
  auto grid_json = [](const UniformGrid& g) {
    return nlohmann::json{{"start", g.start}, {"step", g.step}, {"size", g.size}};
  };
  std::vector<double> re, im;
  for (Eigen::Index k = 0; k < samples_.size(); ++k) {
    re.push_back(samples_.data()[k].real());
    im.push_back(samples_.data()[k].imag());
  }
  return {{"x", grid_json(x_)}, {"xi", grid_json(xi_)}, {"orders", {m_, n_}}, {"re", re}, {"im", im}};
}

GridSymbol GridSymbol::from_json(const nlohmann::json& j) {
  auto grid = [](const nlohmann::json& g) {
    return UniformGrid{g.at("start").get<double>(), g.at("step").get<double>(),
                       g.at("size").get<std::size_t>()};
  };
  const UniformGrid x = grid(j.at("x")), xi = grid(j.at("xi"));
  const auto re = j.at("re").get<std::vector<double>>();
  const auto im = j.at("im").get<std::vector<double>>();
  require(re.size() == x.size * xi.size && im.size() == re.size(), "JSON symbol sample count mismatch");
  SymbolMatrix s(static_cast<Eigen::Index>(x.size), static_cast<Eigen::Index>(xi.size));
  for (Eigen::Index k = 0; k < s.size(); ++k)
    s.data()[k] = cplx(re[static_cast<std::size_t>(k)], im[static_cast<std::size_t>(k)]);
  return GridSymbol(x, xi, std::move(s), j.at("orders").at(0).get<int>(), j.at("orders").at(1).get<int>());
}

double seminorm_estimate(const GridSymbol& a, int alpha, int beta) {
  require(alpha >= 0 && beta >= 0 && alpha <= fd::kMaxOrder && beta <= fd::kMaxOrder,
          "seminorm derivative orders must lie in [0, 4]");
  const int m = a.order_xi(), n = a.order_x();
  double total = 0;
  for (int j = 0; j <= alpha; ++j) {
    for (int k = 0; k <= beta; ++k) {
      const GridSymbol d = a.derivative(j, k);
      double sup = 0;
      for (std::size_t i = 0; i < a.x().size; ++i) {
        const double wx = std::pow(bracket(a.x()[i]), -n + j);
        for (std::size_t l = 0; l < a.xi().size; ++l)
          sup = std::max(sup, std::abs(d(i, l)) * wx * std::pow(bracket(a.xi()[l]), -m + k));
      }
      total += sup;
    }
  }
  return total;
}

GridSymbol modulation_shift(const GridSymbol& b, double theta, double h) {
  require(std::isfinite(theta) && std::isfinite(h), "shift parameters must be finite");
  const UniformGrid& xi = b.xi();
  const double shift = h * theta;
  if (shift == 0.0) return b;
  require(xi.size >= static_cast<std::size_t>(kLagrangePoints), "modulation shift needs >= 8 xi points");
  if (std::abs(shift) > 0.25 * xi.extent())
    throw ResolutionError("modulation shift h*theta exceeds 25% of the xi extent");
  const auto nxi = static_cast<std::ptrdiff_t>(xi.size);
  SymbolMatrix out(b.samples().rows(), b.samples().cols());
  for (std::ptrdiff_t j = 0; j < nxi; ++j) {
    const double s = (xi[static_cast<std::size_t>(j)] - shift - xi.start) / xi.step;
    std::ptrdiff_t i0 = static_cast<std::ptrdiff_t>(std::floor(s)) - kLagrangePoints / 2 + 1;
    i0 = std::clamp<std::ptrdiff_t>(i0, 0, nxi - kLagrangePoints);
    double w[kLagrangePoints];
    for (int p = 0; p < kLagrangePoints; ++p) {
      w[p] = 1.0;
      for (int q = 0; q < kLagrangePoints; ++q)
        if (q != p) w[p] *= (s - static_cast<double>(i0 + q)) / static_cast<double>(p - q);
    }
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      cplx acc = 0;
      for (int p = 0; p < kLagrangePoints; ++p) acc += w[p] * b.samples()(i, i0 + p);
      out(i, j) = acc;
    }
  }
  return GridSymbol(b.x(), xi, std::move(out), b.order_xi(), b.order_x());
}

DivisionCutoffs DivisionCutoffs::standard() {
  DivisionCutoffs c;
  c.chi = cutoff::division_bump;
  c.chi_x = cutoff::division_bump;
  c.c_plus = [](double x) { return cutoff::unit_bump(x, 0.0, 1.0); };
  c.c_minus = [](double x) { return cutoff::unit_bump(x, -1.0, 0.0); };
  return c;
}

DivisionResult divide_modulated(const GridSymbol& a, double theta, const DivisionCutoffs& cutoffs) {
  require(std::isfinite(theta), "theta must be finite");
  if (theta == 0.0) throw InvalidArgument("division by D_x + theta is undefined at theta = 0");
  const UniformGrid& xg = a.x();
  const std::size_t nx = xg.size;
  require(nx >= 16, "division needs at least 16 x points");
  const double peak = a.max_abs();
  DivisionResult result{GridSymbol::zeros_like(a), GridSymbol::zeros_like(a), std::abs(theta) >= 1.0, {}, {}};
  if (peak == 0.0) {
    if (!result.fourier_case) {
      result.a_plus.assign(a.xi().size, 0.0);
      result.a_minus.assign(a.xi().size, 0.0);
    }
    return result;
  }
  const double edge = std::max(a.samples().row(0).cwiseAbs().maxCoeff(),
                               a.samples().row(static_cast<Eigen::Index>(nx - 1)).cwiseAbs().maxCoeff());
  if (edge > cutoffs.tail_tolerance * peak)
    throw ResolutionError("symbol does not decay at the x boundary (tail above tolerance)");

  if (result.fourier_case) {
    // Taper the outer 10% on each side; the tapered-off part is folded into r.
    const double center = 0.5 * (xg.start + xg.back()), half = 0.5 * xg.extent();
    std::vector<double> taper(nx);
    for (std::size_t i = 0; i < nx; ++i)
      taper[i] = 1.0 - cutoff::smooth_step((std::abs(xg[i] - center) - 0.9 * half) / (0.1 * half));
    std::vector<double> eta(nx);
    for (std::size_t k = 0; k < nx; ++k) {
      const double kk = k < (nx + 1) / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(nx);
      eta[k] = 2.0 * kPi * kk / (static_cast<double>(nx) * xg.step);
    }
    Eigen::FFT<double> fft;
    std::vector<cplx> spec, bhat(nx), rhat(nx), bcol, rcol;
    for (Eigen::Index j = 0; j < a.samples().cols(); ++j) {
      std::vector<cplx> col(nx);
      for (std::size_t i = 0; i < nx; ++i) col[i] = taper[i] * a.samples()(static_cast<Eigen::Index>(i), j);
      fft.fwd(spec, col);
      for (std::size_t k = 0; k < nx; ++k) {
        const double c = cutoffs.chi(theta + eta[k]);
        bhat[k] = c == 1.0 ? cplx{} : (1.0 - c) / (eta[k] + theta) * spec[k];
        rhat[k] = -c * spec[k];
      }
      fft.inv(bcol, bhat);
      fft.inv(rcol, rhat);
      for (std::size_t i = 0; i < nx; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        result.b.samples()(ii, j) = bcol[i];
        result.r.samples()(ii, j) = rcol[i] - (1.0 - taper[i]) * a.samples()(ii, j);
      }
    }
    return result;
  }

  // Case |theta| < 1: b = L a_mod with L f = i int_0^x e^{i theta (s - x)} f(s) ds.
  std::size_t origin = 0;
  for (std::size_t i = 1; i < nx; ++i)
    if (std::abs(xg[i]) < std::abs(xg[origin])) origin = i;
  std::vector<cplx> phase(nx);
  std::vector<double> chi_x(nx), cp(nx), cm(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    phase[i] = std::exp(cplx(0, theta * xg[i]));
    chi_x[i] = cutoffs.chi_x(xg[i]);
    cp[i] = cutoffs.c_plus(xg[i]);
    cm[i] = cutoffs.c_minus(xg[i]);
  }
  // I_+(f) = int_0^inf e^{i theta s} f, I_-(f) = int_0^{-inf} e^{i theta s} f.
  auto moments = [&](auto&& f) {
    cplx plus = 0, minus = 0;
    for (std::size_t i = 0; i < nx; ++i) {
      const cplx v = phase[i] * f(i) * xg.step;
      if (xg[i] > 0) plus += v;
      if (xg[i] < 0) minus -= v;
    }
    return std::pair{plus, minus};
  };
  const cplx cp_plus = moments([&](std::size_t i) { return cp[i]; }).first;
  const cplx cm_minus = moments([&](std::size_t i) { return cm[i]; }).second;
  const double theta2 = theta * theta;
  result.a_plus.resize(a.xi().size);
  result.a_minus.resize(a.xi().size);
  std::vector<cplx> mod(nx), integrand(nx);
  for (Eigen::Index j = 0; j < a.samples().cols(); ++j) {
    auto at = [&](std::size_t i) { return a.samples()(static_cast<Eigen::Index>(i), j); };
    auto tilde = [&](std::size_t i) { return (1.0 - chi_x[i]) * at(i); };
    const auto [ip, im] = moments(tilde);
    // a~_pm = i int_0^{pm inf} e^{i theta s} D_s^2 a~ = i theta^2 I_pm(a~) (a~ is flat at 0).
    const cplx a_plus = cplx(0, 1) * theta2 * ip, a_minus = cplx(0, 1) * theta2 * im;
    result.a_plus[static_cast<std::size_t>(j)] = a_plus;
    result.a_minus[static_cast<std::size_t>(j)] = a_minus;
    // Normalizers i int_0^{pm inf} e^{i theta s} D_s^2 c_pm make I_pm(a_mod) = 0.
    const cplx norm_plus = cplx(0, 1) * theta2 * cp_plus, norm_minus = cplx(0, 1) * theta2 * cm_minus;
    for (std::size_t i = 0; i < nx; ++i) {
      mod[i] = tilde(i) - cp[i] * a_plus / norm_plus - cm[i] * a_minus / norm_minus;
      integrand[i] = phase[i] * mod[i];
    }
    const auto cumulative = cumulative_integral(integrand, xg.step, origin);
    for (std::size_t i = 0; i < nx; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      result.b.samples()(ii, j) = cplx(0, 1) * std::conj(phase[i]) * cumulative[i];
      result.r.samples()(ii, j) = mod[i] - at(i);
    }
  }
  return result;
}

GridSymbol apply_dx_plus_theta(const GridSymbol& b, double theta) {
  const UniformGrid& xg = b.x();
  SymbolMatrix out = map_columns(b.samples(), [&](const std::vector<cplx>& col, Eigen::Index) {
    std::vector<cplx> f(col.size());
    for (std::size_t i = 0; i < col.size(); ++i) f[i] = std::exp(cplx(0, theta * xg[i])) * col[i];
    auto d = fd::derivative(f, xg.step, 1);
    for (std::size_t i = 0; i < col.size(); ++i) d[i] *= cplx(0, -1) * std::exp(cplx(0, -theta * xg[i]));
    return d;
  });
  return GridSymbol(xg, b.xi(), std::move(out), b.order_xi(), b.order_x());
}

std::vector<double> far_field_profile(const GridSymbol& f, const std::vector<double>& windows,
                                      double center) {
  std::vector<double> row_max(f.x().size);
  for (std::size_t i = 0; i < f.x().size; ++i)
    row_max[i] = f.samples().row(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff();
  std::vector<double> out;
  for (double X : windows) {
    double m = 0;
    for (std::size_t i = 0; i < f.x().size; ++i)
      if (std::abs(f.x()[i] - center) >= X) m = std::max(m, row_max[i]);
    out.push_back(m);
  }
  return out;
}

DecayRate far_field_decay(const std::vector<double>& windows, const std::vector<double>& profile,
                          double floor) {
  require(windows.size() == profile.size(), "windows and profile must pair up");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < windows.size(); ++i)
    if (profile[i] > floor && windows[i] > 0) {
      lx.push_back(std::log(windows[i]));
      ly.push_back(std::log(profile[i]));
    }
  DecayRate rate;
  rate.used = lx.size();
  if (lx.size() < 2) {
    rate.saturated = true;
    rate.slope = -kInf;
    return rate;
  }
  rate.slope = regression_slope(lx, ly);
  return rate;
}

GridSymbol poisson_bracket(const GridSymbol& a, const GridSymbol& b) {
  if (!a.same_grid(b)) throw InvalidArgument("poisson bracket needs matching grids");
  const SymbolMatrix bracket_samples =
      (a.derivative(0, 1).samples().array() * b.derivative(1, 0).samples().array() -
       b.derivative(0, 1).samples().array() * a.derivative(1, 0).samples().array())
          .matrix();
  return GridSymbol(a.x(), a.xi(), bracket_samples, a.order_xi() + b.order_xi() - 1,
                    a.order_x() + b.order_x() - 1);
}

}  // namespace apspec

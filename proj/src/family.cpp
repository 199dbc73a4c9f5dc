#include "apspec/family.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "apspec/fd.hpp"

namespace apspec {

namespace {

constexpr char kMagic[4] = {'A', 'P', 'C', 'F'};
constexpr std::uint32_t kVersion = 1;
constexpr double kThetaTolerance = 1e-12;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw InvalidArgument("truncated coefficient-family payload");
  return v;
}

}  // namespace

std::string SeminormId::tag() const {
  return "m" + std::to_string(m) + "n" + std::to_string(n) + "a" + std::to_string(alpha) + "b" +
         std::to_string(beta);
}

CoefficientFamily::CoefficientFamily(UniformGrid x, double decay_order)
    : grid_(x), decay_order_(decay_order) {
  require(grid_.size >= 2 && grid_.step > 0, "coefficient grid needs >= 2 increasing points");
}

CoefficientFamily CoefficientFamily::from_function(UniformGrid x, const std::vector<double>& thetas,
                                                   const std::function<cplx(double, double)>& w,
                                                   double decay_order) {
  CoefficientFamily family(x, decay_order);
  for (double theta : thetas) {
    std::vector<cplx> samples(x.size);
    for (std::size_t i = 0; i < x.size; ++i) samples[i] = w(theta, x[i]);
    family.set(theta, std::move(samples));
  }
  return family;
}

void CoefficientFamily::set(double theta, std::vector<cplx> samples) {
  require(std::isfinite(theta), "frequency must be finite");
  require(samples.size() == grid_.size, "coefficient samples must match the grid");
  for (const auto& s : samples)
    require(std::isfinite(s.real()) && std::isfinite(s.imag()), "coefficient samples must be finite");
  auto it = lookup(theta);
  if (it != coeffs_.end()) theta = it->first;
  coeffs_[theta] = std::move(samples);
}

std::map<double, std::vector<cplx>>::const_iterator CoefficientFamily::lookup(double theta) const {
  auto it = coeffs_.lower_bound(theta - kThetaTolerance);
  if (it != coeffs_.end() && std::abs(it->first - theta) <= kThetaTolerance) return it;
  return coeffs_.end();
}

std::vector<double> CoefficientFamily::frequencies() const {
  std::vector<double> out;
  for (const auto& [theta, _] : coeffs_) out.push_back(theta);
  return out;
}

bool CoefficientFamily::has(double theta) const { return lookup(theta) != coeffs_.end(); }

const std::vector<cplx>& CoefficientFamily::coefficient(double theta) const {
  auto it = lookup(theta);
  if (it == coeffs_.end()) throw InvalidArgument("frequency not present in coefficient family");
  return it->second;
}

cplx CoefficientFamily::coefficient_at(double theta, double x) const {
  const auto& w = coefficient(theta);
  const double s = (x - grid_.start) / grid_.step;
  if (s < 0 || s > static_cast<double>(grid_.size - 1)) return 0.0;
  const auto n = static_cast<std::ptrdiff_t>(grid_.size);
  const auto i = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(s), n - 2);
  const double t = s - static_cast<double>(i);
  auto at = [&](std::ptrdiff_t k) { return k < 0 || k >= n ? cplx{} : w[static_cast<std::size_t>(k)]; };
  // Catmull-Rom cubic.
  const cplx p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
  return p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
}

cplx CoefficientFamily::evaluate(double x) const {
  cplx sum = 0;
  for (const auto& [theta, _] : coeffs_) sum += std::exp(cplx(0, theta * x)) * coefficient_at(theta, x);
  return sum;
}

bool CoefficientFamily::is_self_adjoint(double tol) const {
  for (const auto& [theta, w] : coeffs_) {
    auto it = lookup(-theta);
    if (it == coeffs_.end()) return false;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (std::abs(w[i] - std::conj(it->second[i])) > tol) return false;
  }
  return true;
}

double CoefficientFamily::seminorm(double theta, const SeminormId& id) const {
  require(id.m >= 0, "xi-independent coefficients need m >= 0");
  require(id.alpha >= 0 && id.alpha <= fd::kMaxOrder && id.beta >= 0,
          "seminorm derivative counts must lie in [0, 4]");
  const auto& w = coefficient(theta);
  double total = 0;
  for (int j = 0; j <= id.alpha; ++j) {
    const auto d = fd::derivative(w, grid_.step, j);
    double sup = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
      sup = std::max(sup, std::abs(d[i]) * std::pow(bracket(grid_[i]), j - id.n));
    total += sup;
  }
  return total;
}

void CoefficientFamily::write_binary(std::ostream& os) const {
  os.write(kMagic, 4);
  put(os, kVersion);
  put(os, grid_.start);
  put(os, grid_.step);
  put(os, static_cast<std::uint64_t>(grid_.size));
  put(os, decay_order_);
  put(os, static_cast<std::uint64_t>(coeffs_.size()));
  for (const auto& [theta, w] : coeffs_) {
    put(os, theta);
    os.write(reinterpret_cast<const char*>(w.data()),
             static_cast<std::streamsize>(w.size() * sizeof(cplx)));
  }
}

CoefficientFamily CoefficientFamily::read_binary(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw InvalidArgument("not a coefficient-family payload");
  if (get<std::uint32_t>(is) != kVersion) throw InvalidArgument("unsupported payload version");
  UniformGrid grid;
  grid.start = get<double>(is);
  grid.step = get<double>(is);
  grid.size = static_cast<std::size_t>(get<std::uint64_t>(is));
  CoefficientFamily family(grid, get<double>(is));
  const auto count = get<std::uint64_t>(is);
  for (std::uint64_t c = 0; c < count; ++c) {
    const double theta = get<double>(is);
    std::vector<cplx> w(grid.size);
    is.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(cplx)));
    if (!is) throw InvalidArgument("truncated coefficient-family payload");
    family.set(theta, std::move(w));
  }
  return family;
}

}  // namespace apspec

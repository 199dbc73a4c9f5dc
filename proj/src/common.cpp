#include "apspec/common.hpp"
#include "apspec/cutoffs.hpp"

#include <cmath>
#include <cstdio>

namespace apspec {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

double regression_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  require(xs.size() == ys.size() && xs.size() >= 2, "regression needs >= 2 paired points");
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  require(sxx > 0, "regression abscissae are all equal");
  return sxy / sxx;
}

namespace cutoff {

namespace {
double edge(double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; }

// Normalization of the unit bump exp(-1/(1-s^2)) on (-1, 1).
double bump_mass() {
  static const double mass = [] {
    const int n = 4000;
    double sum = 0;
    for (int i = 1; i < n; ++i) {
      const double s = -1.0 + 2.0 * i / n;
      sum += std::exp(-1.0 / (1.0 - s * s));
    }
    return sum * 2.0 / n;
  }();
  return mass;
}
}  // namespace

double smooth_step(double t) {
  if (t <= 0) return 0.0;
  if (t >= 1) return 1.0;
  const double a = edge(t), b = edge(1.0 - t);
  return a / (a + b);
}

double plateau(double t, double inner, double outer) {
  const double a = std::abs(t);
  return 1.0 - smooth_step((a - inner) / (outer - inner));
}

double band(double t, double support_lo, double one_lo, double one_hi, double support_hi) {
  return smooth_step((t - support_lo) / (one_lo - support_lo)) *
         (1.0 - smooth_step((t - one_hi) / (support_hi - one_hi)));
}

double unit_bump(double x, double lo, double hi) {
  if (x <= lo || x >= hi) return 0.0;
  const double half = 0.5 * (hi - lo);
  const double s = (x - 0.5 * (lo + hi)) / half;
  return std::exp(-1.0 / (1.0 - s * s)) / (bump_mass() * half);
}

}  // namespace cutoff
}  // namespace apspec

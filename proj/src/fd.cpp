#include "apspec/fd.hpp"

#include <algorithm>
#include <array>
#include <string>

namespace apspec::fd {

namespace {

struct Stencil {
  int radius;
  std::array<double, 7> weights;  // offsets -radius..radius
  double power;                   // step exponent in the denominator
  double scale;
};

Stencil stencil(int order, bool high) {
  switch (order) {
    case 1:
      return high ? Stencil{2, {1, -8, 0, 8, -1}, 1, 1.0 / 12} : Stencil{1, {-1, 0, 1}, 1, 0.5};
    case 2:
      return high ? Stencil{2, {-1, 16, -30, 16, -1}, 2, 1.0 / 12} : Stencil{1, {1, -2, 1}, 2, 1};
    case 3:
      return high ? Stencil{3, {1, -8, 13, 0, -13, 8, -1}, 3, 1.0 / 8}
                  : Stencil{2, {-1, 2, 0, -2, 1}, 3, 0.5};
    default:
      return high ? Stencil{3, {-1, 12, -39, 56, -39, 12, -1}, 4, 1.0 / 6}
                  : Stencil{2, {1, -4, 6, -4, 1}, 4, 1};
  }
}

// Fornberg weights for the order-th derivative at z from nodes 0..w-1 (unit spacing).
std::vector<double> fornberg(int w, double z, int order) {
  std::vector<std::vector<double>> c(static_cast<std::size_t>(w), std::vector<double>(static_cast<std::size_t>(order) + 1, 0.0));
  double c1 = 1.0, c4 = -z;
  c[0][0] = 1.0;
  for (int i = 1; i < w; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = static_cast<double>(i) - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = static_cast<double>(i - j);
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> out(static_cast<std::size_t>(w));
  for (int i = 0; i < w; ++i) out[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i)][static_cast<std::size_t>(order)];
  return out;
}

}  // namespace

template <class T>
void derivative(const T* data, std::size_t n, std::ptrdiff_t stride, double step, int order,
                T* out, std::ptrdiff_t out_stride) {
  require(order >= 0 && order <= kMaxOrder, "derivative order must lie in [0, 4]");
  if (order == 0) {
    for (std::size_t i = 0; i < n; ++i) out[i * out_stride] = data[i * stride];
    return;
  }
  if (n < static_cast<std::size_t>(2 * order + 1))
    throw ResolutionError("grid too coarse for derivative of order " + std::to_string(order) +
                          ": need at least " + std::to_string(2 * order + 1) + " points");
  Stencil s = stencil(order, true);
  if (n < static_cast<std::size_t>(2 * s.radius + 1)) s = stencil(order, false);
  double denom = 1;
  for (int p = 0; p < s.power; ++p) denom *= step;
  const double factor = s.scale / denom;
  const auto r = static_cast<std::size_t>(s.radius);
  for (std::size_t i = r; i + r < n; ++i) {
    T acc{};
    for (int o = -s.radius; o <= s.radius; ++o)
      acc += s.weights[static_cast<std::size_t>(o + s.radius)] *
             data[(static_cast<std::ptrdiff_t>(i) + o) * stride];
    out[i * out_stride] = acc * factor;
  }
  // One-sided stencils of the same width near the edges.
  const int w = std::min<int>(2 * s.radius + 2, static_cast<int>(n));
  for (std::size_t i = 0; i < r; ++i) {
    const auto left = fornberg(w, static_cast<double>(i), order);
    const auto right = fornberg(w, static_cast<double>(w - 1) - static_cast<double>(i), order);
    T lo{}, hi{};
    for (int q = 0; q < w; ++q) {
      lo += left[static_cast<std::size_t>(q)] * data[q * stride];
      hi += right[static_cast<std::size_t>(q)] * data[(static_cast<std::ptrdiff_t>(n) - w + q) * stride];
    }
    out[static_cast<std::ptrdiff_t>(i) * out_stride] = lo / denom;
    out[static_cast<std::ptrdiff_t>(n - 1 - i) * out_stride] = hi / denom;
  }
}

template void derivative<double>(const double*, std::size_t, std::ptrdiff_t, double, int, double*,
                                 std::ptrdiff_t);
template void derivative<cplx>(const cplx*, std::size_t, std::ptrdiff_t, double, int, cplx*,
                               std::ptrdiff_t);

}  // namespace apspec::fd

#pragma once

#include <cstddef>
#include <vector>

#include "apspec/common.hpp"

namespace apspec::fd {

/// Highest derivative order supported by the stencils below.
inline constexpr int kMaxOrder = 4;

/// Order-th derivative of n samples read at data[i * stride], written to
/// out[i * out_stride]. Fourth-order central stencils where they fit, second
/// order otherwise; points near an edge use one-sided stencils one node wider.
/// Requires n >= 2 * order + 1.
template <class T>
void derivative(const T* data, std::size_t n, std::ptrdiff_t stride, double step, int order,
                T* out, std::ptrdiff_t out_stride);

template <class T>
std::vector<T> derivative(const std::vector<T>& f, double step, int order) {
  std::vector<T> out(f.size());
  derivative(f.data(), f.size(), 1, step, order, out.data(), 1);
  return out;
}

}  // namespace apspec::fd

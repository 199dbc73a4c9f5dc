#pragma once

#include <cmath>
#include <cstdint>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace apspec {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative procedure (Newton, doubling search, ODE step control) failed.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// A numerical configuration cannot resolve the requested quantity
/// (grid too coarse, energy above the trust ceiling, wraparound, ...).
class ResolutionError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

/// Japanese bracket <x> = sqrt(1 + x^2).
inline double bracket(double x) { return std::sqrt(1.0 + x * x); }

/// Uniform grid start, start + step, ..., start + (size - 1) * step.
struct UniformGrid {
  double start = 0.0;
  double step = 1.0;
  std::size_t size = 0;

  double operator[](std::size_t i) const { return start + step * static_cast<double>(i); }
  double back() const { return (*this)[size - 1]; }
  double extent() const { return step * static_cast<double>(size - 1); }
  std::vector<double> values() const {
    std::vector<double> out(size);
    for (std::size_t i = 0; i < size; ++i) out[i] = (*this)[i];
    return out;
  }
  bool operator==(const UniformGrid& o) const {
    return size == o.size && std::abs(start - o.start) <= 1e-12 * (1.0 + std::abs(start)) &&
           std::abs(step - o.step) <= 1e-12 * std::abs(step);
  }

  /// Grid of n points covering [lo, hi] inclusive.
  static UniformGrid linspace(double lo, double hi, std::size_t n) {
    require(n >= 2 && hi > lo, "linspace needs n >= 2 and hi > lo");
    return UniformGrid{lo, (hi - lo) / static_cast<double>(n - 1), n};
  }
};

/// FNV-1a 64-bit hash, chainable through `seed`.
std::uint64_t fnv1a(const void* data, std::size_t bytes,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);
/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

/// Least-squares slope of ys against xs.
double regression_slope(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace apspec

#pragma once

#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "apspec/common.hpp"

namespace apspec {

/// Frequencies closer than this after sorting are treated as one element.
inline constexpr double kFrequencyTolerance = 1e-12;

struct QuasiPeriodicGenerator {
  std::vector<double> omega;
  int n_max = 0;
};

struct LimitPeriodicGenerator {
  std::vector<std::int64_t> m;
  int n_max = 0;
};

struct ExplicitGenerator {
  std::vector<double> values;
};

using FrequencyGenerator =
    std::variant<QuasiPeriodicGenerator, LimitPeriodicGenerator, ExplicitGenerator>;

/// Provenance of one frequency: a lattice point n (quasi-periodic), a signed
/// index {+-n} (limit-periodic) or a position in an explicit list.
using FrequencyLabel = std::vector<std::int64_t>;

/// Finite symmetric truncation of a frequency set: sorted, deduplicated,
/// contains 0 and is closed under negation.
class FrequencySet {
 public:
  FrequencySet() = default;

  const std::vector<double>& elements() const { return elements_; }
  const FrequencyGenerator& generator() const { return generator_; }
  /// labels()[i] lists every provenance of elements()[i].
  const std::vector<std::vector<FrequencyLabel>>& labels() const { return labels_; }

  std::size_t size() const { return elements_.size(); }
  /// Index of theta in elements() (within kFrequencyTolerance), or -1.
  std::ptrdiff_t find(double theta) const;
  bool contains(double theta) const { return find(theta) >= 0; }
  /// Nonzero elements only.
  std::vector<double> nonzero() const;

  nlohmann::json to_json() const;
  static FrequencySet from_json(const nlohmann::json& j);

  /// Builds a set from raw (value, label) pairs; adds 0 and negations.
  static FrequencySet from_pairs(std::vector<std::pair<double, FrequencyLabel>> raw,
                                 FrequencyGenerator generator);

 private:
  std::vector<double> elements_;
  std::vector<std::vector<FrequencyLabel>> labels_;
  FrequencyGenerator generator_;
};

/// {n . omega : |n|_inf <= n_max}.
FrequencySet make_quasi_periodic(const std::vector<double>& omega, int n_max);

/// {+-m_n / n : 1 <= n <= n_max} u {0}.
FrequencySet make_limit_periodic(const std::vector<std::int64_t>& m, int n_max);

/// Symmetrized explicit list.
FrequencySet make_explicit(const std::vector<double>& values);

struct DiophantineResult {
  double c = kInf;
  std::vector<std::int64_t> witness;
};

/// min over 0 < |n|_inf <= n_max of |n . omega| * |n|_2^mu, with a minimizer.
DiophantineResult diophantine_constant(const std::vector<double>& omega, int n_max, double mu);

/// Largest k accepted by min_gap.
inline constexpr int kMaxGapTuple = 24;

/// inf{|s| : s a nonzero subset sum of the tuple}; +inf when every subset sum is 0.
double min_gap(const std::vector<double>& thetas);

}  // namespace apspec

#pragma once

#include <cstdint>
#include <ostream>
#include <random>
#include <utility>
#include <vector>

#include "apspec/family.hpp"

namespace apspec {

/// Largest tuple length accepted by s_weight.
inline constexpr int kMaxWeightOrder = 8;

/// theta -> ||w_theta||_N for one fixed seminorm N.
class SeminormTable {
 public:
  SeminormTable() = default;
  SeminormTable(std::vector<std::pair<double, double>> values, SeminormId id = {});

  static SeminormTable from_family(const CoefficientFamily& family, const SeminormId& id);

  /// Throws InvalidArgument when theta is absent.
  double at(double theta) const;
  bool contains(double theta) const;
  const std::vector<std::pair<double, double>>& values() const { return values_; }
  const SeminormId& id() const { return id_; }

 private:
  std::vector<std::pair<double, double>> values_;  // sorted by theta
  SeminormId id_;
};

struct WeightResult {
  double value = 0.0;  // +inf when a near-resonance overflows
  /// Number of (permutation, composition) terms in the top-level sum, k! * #compositions.
  std::uint64_t terms_evaluated = 0;
  /// Number of admissible compositions of k (parts in [1, floor(k/2)]).
  std::uint64_t composition_count = 0;
};

/// Ordered compositions of k with every part in [1, floor(k/2)].
std::vector<std::vector<int>> admissible_compositions(int k);

/// s_{k,N}(theta, W). Evaluated through ordered set partitions of the tuple: each
/// permutation/composition pair collapses onto one ordered partition into blocks,
/// with multiplicity prod |block|!, because every s_j is symmetric in its arguments.
WeightResult s_weight(const std::vector<double>& thetas, const SeminormTable& table);

/// N_0 = 0, N_1 = 1, N_k = max over admissible compositions of 1 + sum N_{alpha_i}.
int weight_exponent(int k);

struct BasicBoundCase {
  std::vector<double> thetas;
  double lhs = 0.0;       // s_k
  double numerator = 0.0; // prod ||w_theta_i||
  double gap = kInf;      // min_gap(thetas)
  double ratio = 0.0;     // lhs * gap^{N_k} / numerator (0 for vacuous cases)
};

struct BasicBoundReport {
  bool pass = true;
  /// Batch minimal C_k, indexed by k (entry 0 unused unless k = 0 occurs).
  std::vector<double> min_constant;
  std::vector<int> exponent;
  std::vector<BasicBoundCase> witness;  // maximizing case per k
  std::size_t cases = 0;
  std::size_t vacuous = 0;
};

/// Evaluates both sides of the basic bound on every tuple and takes C_k as the
/// batch maximum of the ratio; fails only if some ratio is not finite.
BasicBoundReport check_basic_bound(const std::vector<std::vector<double>>& tuples,
                                   const SeminormTable& table);

struct TrialsConfig {
  std::size_t trials = 1000;
  int k_max = 4;
  std::uint64_t seed = 1;
};

/// Random tuples drawn from the table's frequencies (zero included).
std::vector<std::vector<double>> random_tuples(const SeminormTable& table, const TrialsConfig& cfg);

struct InductCase {
  int n = 0;
  int k = 0;
  double derived = 0.0;    // s_k(sums, derived family)
  double flattened = 0.0;  // s_{nk}(flattened tuple, base family)
};

struct InductReport {
  std::size_t cases = 0;
  std::size_t violations = 0;
  std::vector<InductCase> failures;
};

/// Random instances of the composition property with n*k <= nk_max. The derived
/// family puts ||w~_{theta_1..theta_n}|| = prod ||w_theta_i|| / |theta_i| at each
/// sum; instances whose sums collide are redrawn.
InductReport check_induct(const SeminormTable& base, std::size_t trials, int nk_max,
                          std::uint64_t seed, double rel_tol = 1e-12);

struct AdmissibilityRow {
  int k = 0;
  std::string seminorm_id;
  double partial_sum = 0.0;
  double max_term = 0.0;
  std::vector<double> argmax_tuple;
};

struct AdmissibilityReport {
  std::vector<AdmissibilityRow> rows;
  /// Per seminorm: slope of log ||w_theta|| against log <theta> over nonzero theta.
  std::vector<std::pair<std::string, double>> decay_rate;
  std::vector<std::string> warnings;
};

/// Partial sums of s_k over Theta^k for k = 1..k_max and each seminorm.
AdmissibilityReport admissibility_report(const CoefficientFamily& family, int k_max,
                                         const std::vector<SeminormId>& seminorms);
/// Same, from precomputed tables.
AdmissibilityReport admissibility_report(const std::vector<SeminormTable>& tables, int k_max);

void write_csv(std::ostream& os, const AdmissibilityReport& report);

}  // namespace apspec

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "apspec/freqsets.hpp"
#include "apspec/weights.hpp"

using namespace apspec;

namespace {

const double kGolden = (1.0 + std::sqrt(5.0)) / 2.0;

// Literal recursion: every permutation, every composition, no memoization.
double brute_s(const std::vector<double>& t, const SeminormTable& table) {
  const int k = static_cast<int>(t.size());
  if (k == 0) return 1.0;
  const double sigma = std::accumulate(t.begin(), t.end(), 0.0);
  if (std::abs(sigma) <= 1e-12) return 0.0;
  if (k == 1) return table.at(t[0]) / std::abs(t[0]);
  std::vector<int> perm(t.size());
  std::iota(perm.begin(), perm.end(), 0);
  double total = 0;
  do {
    std::vector<double> p(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) p[i] = t[static_cast<std::size_t>(perm[i])];
    for (const auto& alpha : admissible_compositions(k)) {
      double prod = 1;
      std::size_t beta = 0;
      for (int part : alpha) {
        std::vector<double> block(p.begin() + static_cast<std::ptrdiff_t>(beta),
                                  p.begin() + static_cast<std::ptrdiff_t>(beta) + part);
        prod *= brute_s(block, table);
        beta += static_cast<std::size_t>(part);
      }
      total += prod;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total / std::abs(sigma);
}

SeminormTable golden_table(int n_max) {
  const auto set = make_quasi_periodic({1.0, kGolden - 1.0}, n_max);
  std::vector<std::pair<double, double>> v;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& n = set.labels()[i].empty() ? FrequencyLabel{0, 0} : set.labels()[i].front();
    const double norm = std::sqrt(1.0 + static_cast<double>(n[0] * n[0] + n[1] * n[1]));
    v.emplace_back(set.elements()[i], std::pow(norm, -8.0));
  }
  return SeminormTable(v);
}

}  // namespace

TEST_CASE("compositions and exponents") {
  CHECK(admissible_compositions(1).empty());
  CHECK(admissible_compositions(2) == std::vector<std::vector<int>>{{1, 1}});
  CHECK(admissible_compositions(4).size() == 5);
  CHECK(weight_exponent(0) == 0);
  CHECK(weight_exponent(1) == 1);
  CHECK(weight_exponent(2) == 3);
  CHECK(weight_exponent(3) == 4);
  CHECK(weight_exponent(4) == 7);
}

TEST_CASE("s_weight base cases and hand example") {
  const SeminormTable table({{-2, 1}, {-1, 1}, {0, 5}, {1, 1}, {2, 1}});
  CHECK(s_weight({}, table).value == 1.0);
  CHECK(s_weight({1.0, -1.0}, table).value == 0.0);
  CHECK(s_weight({0.0}, table).value == 0.0);
  CHECK(s_weight({2.0}, table).value == doctest::Approx(0.5));
  const auto r = s_weight({1.0, 2.0}, table);
  CHECK(r.value == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(r.composition_count == 1);
  CHECK(r.terms_evaluated == 2);
  CHECK_THROWS_AS(s_weight({3.0}, table), InvalidArgument);
  CHECK_THROWS_AS(s_weight(std::vector<double>(9, 1.0), table), InvalidArgument);
}

TEST_CASE("s_weight agrees with the literal recursion") {
  const auto table = golden_table(2);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, table.values().size() - 1);
  for (int trial = 0; trial < 120; ++trial) {
    std::vector<double> t(static_cast<std::size_t>(1 + trial % 6));
    for (auto& x : t) x = table.values()[pick(rng)].first;
    const double fast = s_weight(t, table).value, slow = brute_s(t, table);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-11));
  }
}

TEST_CASE("s_weight permutation invariance and linear scaling") {
  std::vector<std::pair<double, double>> base{{0.3, 0.7}, {-1.1, 1.3}, {2.0, 0.4}, {0.9, 2.2}, {-0.35, 0.5}};
  const SeminormTable table(base);
  std::vector<double> t{0.3, -1.1, 2.0, 0.9, -0.35};
  const double v = s_weight(t, table).value;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    std::shuffle(t.begin(), t.end(), rng);
    CHECK(s_weight(t, table).value == doctest::Approx(v).epsilon(1e-12));
  }
  auto scaled = base;
  scaled[2].second *= 3.5;
  CHECK(s_weight(t, SeminormTable(scaled)).value == doctest::Approx(3.5 * v).epsilon(1e-12));
}

TEST_CASE("s_weight infinite sentinel propagates") {
  const SeminormTable table({{1.0, kInf}, {2.0, 1.0}});
  CHECK(std::isinf(s_weight({1.0, 2.0}, table).value));
}

TEST_CASE("basic bound examples") {
  const SeminormTable table({{-2, 3}, {2, 3}, {-1, 1}, {1, 1}, {0, 0}});
  auto r = check_basic_bound({{2.0}}, table);
  CHECK(r.pass);
  CHECK(r.witness[1].lhs == doctest::Approx(1.5));
  CHECK(r.min_constant[1] == doctest::Approx(1.0));
  r = check_basic_bound({{1.0, -1.0}}, table);
  CHECK(r.pass);
  CHECK(r.vacuous == 1);
}

TEST_CASE("basic bound over a golden-ratio battery") {
  const auto table = golden_table(3);
  const auto tuples = random_tuples(table, {400, 4, 9});
  const auto r = check_basic_bound(tuples, table);
  CHECK(r.pass);
  for (int k = 1; k <= 4; ++k) CHECK(std::isfinite(r.min_constant[static_cast<std::size_t>(k)]));
}

TEST_CASE("induct property") {
  const auto table = golden_table(2);
  const auto r = check_induct(table, 120, 6, 13);
  CHECK(r.cases == 120);
  CHECK(r.violations == 0);
}

TEST_CASE("admissibility report examples") {
  const SeminormTable single({{-1, 1}, {0, 1}, {1, 1}});
  auto rep = admissibility_report({single}, 1);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].partial_sum == doctest::Approx(2.0));
  const SeminormTable zero({{-1, 0}, {0, 0}, {1, 0}});
  rep = admissibility_report({zero}, 3);
  for (const auto& row : rep.rows) CHECK(row.partial_sum == 0.0);
  CHECK(admissibility_report({zero}, 5).warnings.size() == 1);
}

TEST_CASE("admissibility report on a golden family is finite and decays") {
  const auto rep = admissibility_report({golden_table(2)}, 3);
  for (const auto& row : rep.rows) CHECK(std::isfinite(row.partial_sum));
  CHECK(rep.decay_rate[0].second < -1.0);
  std::ostringstream os;
  write_csv(os, rep);
  CHECK(os.str().rfind("k,seminorm_id,partial_sum,max_term,argmax_tuple\n", 0) == 0);
}

TEST_CASE("admissibility from a sampled family") {
  const auto grid = UniformGrid::linspace(-10, 10, 401);
  const auto fam = CoefficientFamily::from_function(
      grid, {-1.0, 1.0}, [](double, double x) { return cplx(std::exp(-x * x)); });
  const auto rep = admissibility_report(fam, 1, {SeminormId{0, 0, 0, 0}});
  CHECK(rep.rows[0].partial_sum == doctest::Approx(2.0).epsilon(1e-9));
}

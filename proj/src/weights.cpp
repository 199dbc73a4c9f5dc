#include "apspec/weights.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>

#include "apspec/freqsets.hpp"

namespace apspec {

namespace {

// 0 annihilates: a vanishing factor comes from an exact zero-sum branch.
double mul(double a, double b) { return a == 0.0 || b == 0.0 ? 0.0 : a * b; }

double factorial(int n) {
  double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

std::uint64_t count_compositions(int k, int max_part) {
  std::vector<std::uint64_t> c(static_cast<std::size_t>(k) + 1, 0);
  c[0] = 1;
  for (int total = 1; total <= k; ++total)
    for (int part = 1; part <= std::min(max_part, total); ++part)
      c[static_cast<std::size_t>(total)] += c[static_cast<std::size_t>(total - part)];
  return k == 0 ? 0 : c[static_cast<std::size_t>(k)];
}

class WeightEvaluator {
 public:
  WeightEvaluator(const std::vector<double>& thetas, const SeminormTable& table)
      : thetas_(thetas), norms_(thetas.size()) {
    for (std::size_t i = 0; i < thetas.size(); ++i) norms_[i] = table.at(thetas[i]);
    s_memo_.fill(-1.0);
    for (auto& row : d_memo_) row.fill(-1.0);
  }

  double s(unsigned mask) {
    double& slot = s_memo_[mask];
    if (slot >= 0) return slot;
    const int j = std::popcount(mask);
    if (j == 0) return slot = 1.0;
    double sigma = 0;
    for (unsigned rest = mask; rest; rest &= rest - 1) sigma += thetas_[std::countr_zero(rest)];
    if (std::abs(sigma) <= kFrequencyTolerance) return slot = 0.0;
    if (j == 1) return slot = norms_[std::countr_zero(mask)] / std::abs(sigma);
    return slot = d(mask, j / 2) / std::abs(sigma);
  }

 private:
  // Sum over ordered partitions of mask into blocks of size <= max_part.
  double d(unsigned mask, int max_part) {
    if (mask == 0) return 1.0;
    double& slot = d_memo_[static_cast<std::size_t>(max_part)][mask];
    if (slot >= 0) return slot;
    double total = 0;
    for (unsigned sub = mask; sub; sub = (sub - 1) & mask) {
      const int size = std::popcount(sub);
      if (size > max_part) continue;
      total += mul(factorial(size) * s(sub), d(mask & ~sub, max_part));
    }
    return slot = total;
  }

  const std::vector<double>& thetas_;
  std::vector<double> norms_;
  std::array<double, 256> s_memo_{};
  std::array<std::array<double, 256>, kMaxWeightOrder / 2 + 1> d_memo_{};
};

}  // namespace

SeminormTable::SeminormTable(std::vector<std::pair<double, double>> values, SeminormId id)
    : values_(std::move(values)), id_(id) {
  for (const auto& [theta, v] : values_)
    require(std::isfinite(theta) && v >= 0 && !std::isnan(v), "seminorm values must be >= 0");
  std::sort(values_.begin(), values_.end());
}

SeminormTable SeminormTable::from_family(const CoefficientFamily& family, const SeminormId& id) {
  std::vector<std::pair<double, double>> values;
  for (double theta : family.frequencies()) values.emplace_back(theta, family.seminorm(theta, id));
  return SeminormTable(std::move(values), id);
}

bool SeminormTable::contains(double theta) const {
  auto it = std::lower_bound(values_.begin(), values_.end(),
                             std::make_pair(theta - kFrequencyTolerance, -kInf));
  return it != values_.end() && std::abs(it->first - theta) <= kFrequencyTolerance;
}

double SeminormTable::at(double theta) const {
  auto it = std::lower_bound(values_.begin(), values_.end(),
                             std::make_pair(theta - kFrequencyTolerance, -kInf));
  if (it == values_.end() || std::abs(it->first - theta) > kFrequencyTolerance)
    throw InvalidArgument("frequency missing from seminorm table");
  return it->second;
}

std::vector<std::vector<int>> admissible_compositions(int k) {
  std::vector<std::vector<int>> out;
  if (k <= 0) return out;
  const int max_part = k / 2;
  std::vector<int> current;
  auto rec = [&](auto&& self, int remaining) -> void {
    if (remaining == 0) {
      out.push_back(current);
      return;
    }
    for (int part = 1; part <= std::min(max_part, remaining); ++part) {
      current.push_back(part);
      self(self, remaining - part);
      current.pop_back();
    }
  };
  if (max_part >= 1) rec(rec, k);
  return out;
}

WeightResult s_weight(const std::vector<double>& thetas, const SeminormTable& table) {
  const int k = static_cast<int>(thetas.size());
  require(k <= kMaxWeightOrder, "s_weight supports k <= 8");
  WeightResult result;
  result.composition_count = count_compositions(k, k / 2);
  result.terms_evaluated =
      static_cast<std::uint64_t>(factorial(k)) * result.composition_count;
  WeightEvaluator eval(thetas, table);
  result.value = eval.s(k == 0 ? 0u : (1u << k) - 1u);
  return result;
}

int weight_exponent(int k) {
  require(k >= 0 && k <= kMaxWeightOrder, "weight exponent defined for 0 <= k <= 8");
  std::vector<int> n(static_cast<std::size_t>(k) + 1, 0);
  if (k >= 1) n[1] = 1;
  for (int j = 2; j <= k; ++j) {
    int best = 0;
    for (const auto& alpha : admissible_compositions(j)) {
      int total = 1;
      for (int part : alpha) total += n[static_cast<std::size_t>(part)];
      best = std::max(best, total);
    }
    n[static_cast<std::size_t>(j)] = best;
  }
  return n[static_cast<std::size_t>(k)];
}

BasicBoundReport check_basic_bound(const std::vector<std::vector<double>>& tuples,
                                   const SeminormTable& table) {
  BasicBoundReport report;
  for (const auto& thetas : tuples) {
    const int k = static_cast<int>(thetas.size());
    require(k <= kMaxWeightOrder, "check_basic_bound supports k <= 8");
    if (report.min_constant.size() <= static_cast<std::size_t>(k)) {
      report.min_constant.resize(static_cast<std::size_t>(k) + 1, 0.0);
      report.witness.resize(static_cast<std::size_t>(k) + 1);
      report.exponent.resize(static_cast<std::size_t>(k) + 1, 0);
    }
    const auto ks = static_cast<std::size_t>(k);
    report.exponent[ks] = weight_exponent(k);
    BasicBoundCase c;
    c.thetas = thetas;
    c.lhs = s_weight(thetas, table).value;
    c.numerator = 1.0;
    for (double t : thetas) c.numerator *= table.at(t);
    c.gap = k == 0 ? kInf : min_gap(thetas);
    ++report.cases;
    if (c.lhs == 0.0) {
      ++report.vacuous;
      c.ratio = 0.0;
    } else {
      c.ratio = c.lhs * std::pow(c.gap, report.exponent[ks]) / c.numerator;
      if (k == 0) c.ratio = c.lhs;
      if (!std::isfinite(c.ratio)) report.pass = false;
    }
    if (!(c.ratio <= report.min_constant[ks])) {
      report.min_constant[ks] = c.ratio;
      report.witness[ks] = c;
    }
  }
  return report;
}

std::vector<std::vector<double>> random_tuples(const SeminormTable& table, const TrialsConfig& cfg) {
  require(!table.values().empty(), "seminorm table is empty");
  require(cfg.k_max >= 1 && cfg.k_max <= kMaxWeightOrder, "k_max must lie in [1, 8]");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick_k(1, cfg.k_max);
  std::uniform_int_distribution<std::size_t> pick(0, table.values().size() - 1);
  std::vector<std::vector<double>> out(cfg.trials);
  for (auto& tuple : out) {
    tuple.resize(static_cast<std::size_t>(pick_k(rng)));
    for (auto& t : tuple) t = table.values()[pick(rng)].first;
  }
  return out;
}

InductReport check_induct(const SeminormTable& base, std::size_t trials, int nk_max,
                          std::uint64_t seed, double rel_tol) {
  std::vector<double> pool;
  for (const auto& [theta, v] : base.values())
    if (theta != 0.0) pool.push_back(theta);
  require(!pool.empty(), "induct check needs nonzero base frequencies");
  require(nk_max >= 2 && nk_max <= kMaxWeightOrder, "nk_max must lie in [2, 8]");
  std::vector<std::pair<int, int>> shapes;
  for (int n = 2; n <= nk_max; ++n)
    for (int k = 1; n * k <= nk_max; ++k) shapes.emplace_back(n, k);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_shape(0, shapes.size() - 1);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  InductReport report;
  while (report.cases < trials) {
    const auto [n, k] = shapes[pick_shape(rng)];
    std::vector<double> flat, sums(static_cast<std::size_t>(k), 0.0),
        derived_norm(static_cast<std::size_t>(k), 1.0);
    for (int j = 0; j < k; ++j)
      for (int i = 0; i < n; ++i) {
        const double t = pool[pick(rng)];
        flat.push_back(t);
        sums[static_cast<std::size_t>(j)] += t;
        derived_norm[static_cast<std::size_t>(j)] *= base.at(t) / std::abs(t);
      }
    std::vector<std::pair<double, double>> derived;
    bool collide = false;
    for (int j = 0; j < k; ++j) {
      for (const auto& [s, v] : derived)
        if (std::abs(s - sums[static_cast<std::size_t>(j)]) <= kFrequencyTolerance) collide = true;
      derived.emplace_back(sums[static_cast<std::size_t>(j)], derived_norm[static_cast<std::size_t>(j)]);
    }
    if (collide) continue;
    InductCase c{n, k, s_weight(sums, SeminormTable(derived)).value, s_weight(flat, base).value};
    ++report.cases;
    if (c.derived > c.flattened * (1.0 + rel_tol)) {
      ++report.violations;
      report.failures.push_back(c);
    }
  }
  return report;
}

AdmissibilityReport admissibility_report(const CoefficientFamily& family, int k_max,
                                         const std::vector<SeminormId>& seminorms) {
  std::vector<SeminormTable> tables;
  for (const auto& id : seminorms) tables.push_back(SeminormTable::from_family(family, id));
  return admissibility_report(tables, k_max);
}

AdmissibilityReport admissibility_report(const std::vector<SeminormTable>& tables, int k_max) {
  require(k_max >= 0 && k_max <= kMaxWeightOrder, "k_max must lie in [0, 8]");
  AdmissibilityReport report;
  if (k_max > 4)
    report.warnings.push_back("k_max > 4: cost grows like |Theta|^k * k! * compositions");
  for (const auto& table : tables) {
    const auto& vals = table.values();
    const std::size_t m = vals.size();
    for (int k = 1; k <= k_max; ++k) {
      AdmissibilityRow row;
      row.k = k;
      row.seminorm_id = table.id().tag();
      std::vector<std::size_t> idx(static_cast<std::size_t>(k), 0);
      std::vector<double> tuple(static_cast<std::size_t>(k));
      if (m == 0) {
        report.rows.push_back(row);
        continue;
      }
      while (true) {
        for (std::size_t i = 0; i < idx.size(); ++i) tuple[i] = vals[idx[i]].first;
        const double v = s_weight(tuple, table).value;
        row.partial_sum += v;
        if (row.argmax_tuple.empty() || v > row.max_term) {
          row.max_term = v;
          row.argmax_tuple = tuple;
        }
        std::size_t pos = 0;
        while (pos < idx.size() && ++idx[pos] == m) idx[pos++] = 0;
        if (pos == idx.size()) break;
      }
      report.rows.push_back(row);
    }
    std::vector<double> lx, ly;
    for (const auto& [theta, v] : vals)
      if (theta != 0.0 && v > 0) {
        lx.push_back(std::log(bracket(theta)));
        ly.push_back(std::log(v));
      }
    double rate = 0.0;
    bool spread = false;
    for (double x : lx) spread = spread || std::abs(x - lx.front()) > 1e-12;
    if (lx.size() >= 2 && spread) rate = regression_slope(lx, ly);
    report.decay_rate.emplace_back(table.id().tag(), rate);
  }
  return report;
}

void write_csv(std::ostream& os, const AdmissibilityReport& report) {
  const auto old = os.precision(17);
  os << "k,seminorm_id,partial_sum,max_term,argmax_tuple\n";
  for (const auto& row : report.rows) {
    os << row.k << ',' << row.seminorm_id << ',' << row.partial_sum << ',' << row.max_term << ",\"";
    for (std::size_t i = 0; i < row.argmax_tuple.size(); ++i)
      os << (i ? " " : "") << row.argmax_tuple[i];
    os << "\"\n";
  }
  os.precision(old);
}

}  // namespace apspec

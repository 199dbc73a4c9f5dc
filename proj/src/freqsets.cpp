#include "apspec/freqsets.hpp"

#include <algorithm>
#include <cmath>

namespace apspec {

namespace {

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw InvalidArgument(std::string(what) + " has a non-finite component");
}

// Odometer over the cube {-n_max..n_max}^d.
bool next_lattice_point(std::vector<std::int64_t>& n, int n_max) {
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] < n_max) {
      ++n[i];
      return true;
    }
    n[i] = -n_max;
  }
  return false;
}

}  // namespace

FrequencySet FrequencySet::from_pairs(std::vector<std::pair<double, FrequencyLabel>> raw,
                                      FrequencyGenerator generator) {
  raw.emplace_back(0.0, FrequencyLabel{});
  std::sort(raw.begin(), raw.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  FrequencySet set;
  set.generator_ = std::move(generator);
  for (auto& [value, label] : raw) {
    if (!set.elements_.empty() && value - set.elements_.back() <= kFrequencyTolerance) {
      if (!label.empty()) set.labels_.back().push_back(std::move(label));
      continue;
    }
    set.elements_.push_back(value);
    set.labels_.emplace_back();
    if (!label.empty()) set.labels_.back().push_back(std::move(label));
  }
  // Snap the zero cluster exactly to 0 so sign symmetry holds bit for bit.
  const auto z = set.find(0.0);
  set.elements_[static_cast<std::size_t>(z)] = 0.0;
  return set;
}

std::ptrdiff_t FrequencySet::find(double theta) const {
  auto it = std::lower_bound(elements_.begin(), elements_.end(), theta - kFrequencyTolerance);
  if (it != elements_.end() && std::abs(*it - theta) <= kFrequencyTolerance)
    return it - elements_.begin();
  return -1;
}

std::vector<double> FrequencySet::nonzero() const {
  std::vector<double> out;
  for (double t : elements_)
    if (t != 0.0) out.push_back(t);
  return out;
}

FrequencySet make_quasi_periodic(const std::vector<double>& omega, int n_max) {
  require(!omega.empty(), "quasi-periodic generator needs d >= 1");
  require(n_max >= 0, "n_max must be >= 0");
  check_finite(omega, "omega");
  std::vector<std::pair<double, FrequencyLabel>> raw;
  std::vector<std::int64_t> n(omega.size(), -n_max);
  do {
    double v = 0;
    for (std::size_t i = 0; i < n.size(); ++i) v += static_cast<double>(n[i]) * omega[i];
    raw.emplace_back(v, n);
  } while (next_lattice_point(n, n_max));
  return FrequencySet::from_pairs(std::move(raw), QuasiPeriodicGenerator{omega, n_max});
}

FrequencySet make_limit_periodic(const std::vector<std::int64_t>& m, int n_max) {
  require(!m.empty(), "limit-periodic generator needs a nonempty m sequence");
  require(n_max >= 1 && static_cast<std::size_t>(n_max) <= m.size(),
          "n_max must lie in [1, len(m)]");
  std::vector<std::pair<double, FrequencyLabel>> raw;
  for (int n = 1; n <= n_max; ++n) {
    const auto mn = m[static_cast<std::size_t>(n - 1)];
    require(mn >= 1, "limit-periodic m_n must be >= 1");
    const double theta = static_cast<double>(mn) / n;
    raw.emplace_back(theta, FrequencyLabel{n});
    raw.emplace_back(-theta, FrequencyLabel{-n});
  }
  return FrequencySet::from_pairs(std::move(raw), LimitPeriodicGenerator{m, n_max});
}

FrequencySet make_explicit(const std::vector<double>& values) {
  check_finite(values, "explicit frequency list");
  std::vector<std::pair<double, FrequencyLabel>> raw;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto idx = static_cast<std::int64_t>(i) + 1;
    raw.emplace_back(values[i], FrequencyLabel{idx});
    raw.emplace_back(-values[i], FrequencyLabel{-idx});
  }
  return FrequencySet::from_pairs(std::move(raw), ExplicitGenerator{values});
}

DiophantineResult diophantine_constant(const std::vector<double>& omega, int n_max, double mu) {
  require(!omega.empty(), "omega must be nonempty");
  require(n_max >= 1, "n_max must be >= 1");
  require(mu >= 0 && std::isfinite(mu), "mu must be finite and >= 0");
  check_finite(omega, "omega");
  DiophantineResult best;
  std::vector<std::int64_t> n(omega.size(), -n_max);
  do {
    // n and -n give the same value; keep the lexicographically positive one.
    auto first = std::find_if(n.begin(), n.end(), [](std::int64_t v) { return v != 0; });
    if (first == n.end() || *first < 0) continue;
    double dot = 0, norm2 = 0;
    for (std::size_t i = 0; i < n.size(); ++i) {
      dot += static_cast<double>(n[i]) * omega[i];
      norm2 += static_cast<double>(n[i] * n[i]);
    }
    const double value = std::abs(dot) * std::pow(std::sqrt(norm2), mu);
    if (value < best.c) {
      best.c = value;
      best.witness = n;
    }
  } while (next_lattice_point(n, n_max));
  if (best.c <= kFrequencyTolerance) best.c = 0.0;
  return best;
}

double min_gap(const std::vector<double>& thetas) {
  require(!thetas.empty(), "min_gap needs k >= 1");
  require(thetas.size() <= static_cast<std::size_t>(kMaxGapTuple),
          "min_gap enumerates 2^k subsets; k is capped at 24");
  check_finite(thetas, "theta tuple");
  // Gray-code walk: each step adds or removes one element.
  const std::uint32_t count = 1u << thetas.size();
  double sum = 0, gap = kInf;
  for (std::uint32_t i = 1; i < count; ++i) {
    const int bit = __builtin_ctz(i);
    const std::uint32_t gray = i ^ (i >> 1);
    sum += (gray >> bit & 1u) ? thetas[static_cast<std::size_t>(bit)]
                               : -thetas[static_cast<std::size_t>(bit)];
    const double a = std::abs(sum);
    if (a > kFrequencyTolerance) gap = std::min(gap, a);
  }
  return gap;
}

namespace {

nlohmann::json generator_json(const FrequencyGenerator& g) {
  return std::visit(
      [](const auto& gen) -> nlohmann::json {
        using T = std::decay_t<decltype(gen)>;
        if constexpr (std::is_same_v<T, QuasiPeriodicGenerator>)
          return {{"kind", "quasi_periodic"}, {"omega", gen.omega}, {"n_max", gen.n_max}};
        else if constexpr (std::is_same_v<T, LimitPeriodicGenerator>)
          return {{"kind", "limit_periodic"}, {"m", gen.m}, {"n_max", gen.n_max}};
        else
          return {{"kind", "explicit"}, {"values", gen.values}};
      },
      g);
}

}  // namespace

nlohmann::json FrequencySet::to_json() const {
  nlohmann::json labels = nlohmann::json::object();
  for (std::size_t i = 0; i < elements_.size(); ++i) {
    char key[40];
    std::snprintf(key, sizeof key, "%.17g", elements_[i]);
    labels[key] = labels_[i];
  }
  return {{"generator", generator_json(generator_)}, {"elements", elements_}, {"labels", labels}};
}

FrequencySet FrequencySet::from_json(const nlohmann::json& j) {
  const auto& g = j.at("generator");
  const auto kind = g.at("kind").get<std::string>();
  if (kind == "quasi_periodic")
    return make_quasi_periodic(g.at("omega").get<std::vector<double>>(), g.at("n_max").get<int>());
  if (kind == "limit_periodic")
    return make_limit_periodic(g.at("m").get<std::vector<std::int64_t>>(),
                               g.at("n_max").get<int>());
  if (kind == "explicit") return make_explicit(g.at("values").get<std::vector<double>>());
  throw InvalidArgument("unknown frequency generator kind: " + kind);
}

}  // namespace apspec

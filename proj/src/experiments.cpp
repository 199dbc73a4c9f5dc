#include "apspec/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <lapacke.h>

#include "apspec/asymptotics.hpp"
#include "apspec/cutoffs.hpp"
#include "apspec/freqsets.hpp"
#include "apspec/gauge.hpp"
#include "apspec/spectral.hpp"
#include "apspec/weights.hpp"
#include "apspec/wvn.hpp"

namespace apspec {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

const double kGolden = 0.5 * (1.0 + std::sqrt(5.0));

enum class FieldType { number, integer, boolean, numbers, pairs, potential };

struct Field {
  std::string name;
  FieldType type;
  json fallback;
  std::string doc;
  double lo = -kInf;
  bool lo_open = false;
  double hi = kInf;
  std::size_t min_items = 0;
  std::size_t max_items = 1u << 20;
};

const char* type_name(FieldType t) {
  switch (t) {
    case FieldType::number: return "number";
    case FieldType::integer: return "integer";
    case FieldType::boolean: return "boolean";
    case FieldType::numbers: return "number[]";
    case FieldType::pairs: return "[number, number][]";
    case FieldType::potential: return "potential";
  }
  return "?";
}

Field num(std::string name, double fallback, std::string doc, double lo = -kInf, bool lo_open = false,
          double hi = kInf) {
  return {std::move(name), FieldType::number, fallback, std::move(doc), lo, lo_open, hi};
}
Field integer(std::string name, std::int64_t fallback, std::string doc, double lo = -kInf, double hi = kInf) {
  return {std::move(name), FieldType::integer, fallback, std::move(doc), lo, false, hi};
}
Field boolean(std::string name, bool fallback, std::string doc) {
  return {std::move(name), FieldType::boolean, fallback, std::move(doc)};
}
Field numbers(std::string name, json fallback, std::string doc, std::size_t min_items, double lo = -kInf,
              bool lo_open = false, std::size_t max_items = 1u << 20) {
  return {std::move(name), FieldType::numbers, std::move(fallback), std::move(doc), lo, lo_open, kInf,
          min_items, max_items};
}
Field pairs(std::string name, json fallback, std::string doc) {
  return {std::move(name), FieldType::pairs, std::move(fallback), std::move(doc), -kInf, false, kInf, 1};
}
Field potential(std::string name, std::string doc) {
  return {std::move(name), FieldType::potential, json{{"type", "zero"}}, std::move(doc)};
}

const std::map<std::string, std::vector<Field>>& schemas() {
  static const std::map<std::string, std::vector<Field>> s = {
      {"diophantine",
       {numbers("omega", {1.0, kGolden}, "base frequencies", 1),
        integer("n_max", 1000, "lattice radius |n|_inf", 1, 1e7),
        num("mu", 1.0, "exponent of the Euclidean lattice norm", 0.0)}},
      {"weights",
       {numbers("omega", {1.0, kGolden - 1.0}, "base frequencies of the table", 1),
        integer("n_max", 3, "lattice radius of the frequency table", 1, 50),
        num("decay", 8.0, "table norms ||w_n|| = <n>^-decay", 0.0),
        integer("trials", 1000, "random basic-bound tuples", 1),
        integer("k_max", 4, "largest tuple length", 1, kMaxWeightOrder),
        integer("induct_trials", 200, "random composition instances", 0),
        integer("nk_max", 6, "largest n k in the composition check", 2, kMaxWeightOrder),
        integer("admissibility_k_max", 2, "largest k of the admissibility partial sums", 1, 4)}},
      {"gauge-sweep",
       {integer("box_size", 1024, "periodic box nodes (even)", 16, 4096),
        num("box_length", 4.0 * kPi, "periodic box length", 0.0, true),
        num("theta", 1.0, "single modulation frequency (its partner -theta is added)", 0.0, true),
        num("amplitude", 1.0, "w_theta = amplitude exp(-(x / width)^2)"),
        num("width", 1.0, "Gaussian width", 0.0, true),
        numbers("band", {0.5, 2.0}, "energy band (a, b)", 2, 0.0, true, 2),
        numbers("hs", {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64}, "semiclassical parameters", 1, 0.0, true),
        integer("truncation", 3, "terms of the conjugation series", 1, 12),
        boolean("exact_oracle", true, "compare spectra under exact conjugation by e^{iG}"),
        boolean("write_symbols", true, "write generator and new-diagonal symbols as binary payloads")}},
      {"embed",
       {numbers("kappas", {1.0}, "distinct positive wavenumbers", 1, 0.0, true, 8),
        integer("m_max", 0, "levels to build (0: all)", 0, 8),
        integer("stability_power", 2, "weight power of the stability condition", 1, 2),
        boolean("enforce_budget", true, "require the C^m budget of each correction"),
        num("far", 800.0, "start of the backward integrations", 0.0, true),
        num("R_limit", 200.0, "largest activation radius tried", 1.0),
        num("check_L", 400.0, "half-line length of the checks", 0.0, true),
        integer("check_N", 40001, "truncated-operator nodes (0 skips the check)", 0, 200001),
        num("sample_step", 0.02, "output sample spacing", 0.0, true)}},
      {"kernel-sweep",
       {num("L", 100.0, "operator on [-L, L]", 0.0, true),
        integer("N", 4000, "nodes including the boundary", 3, 200001),
        potential("W0", "potential"),
        numbers("lambdas", {2.0}, "spectral parameters", 1, 0.0),
        pairs("pairs", {{0.0, 1.0}, {0.0, 2.0}, {-3.0, 1.0}, {0.0, 0.0}}, "kernel points (x, y)")}},
      {"fit",
       {num("L", 20.0, "operator on [-L, L]", 0.0, true),
        integer("N", 24001, "nodes including the boundary", 3, 200001),
        potential("W0", "potential"),
        num("lambda_lo", 5.0, "fit window start", 0.0, true),
        num("lambda_hi", 25.0, "fit window end", 0.0, true),
        integer("J", 1, "highest order of the expansion", 0, 6),
        pairs("pairs", {{1.0, -1.0}, {0.0, 0.0}}, "kernel points (x, y); x = y fits the diagonal")}},
      {"wave-vs-eig",
       {num("L", 12.0, "operator on [-L, L]", 0.0, true),
        integer("N", 2401, "nodes including the boundary", 3, 20001),
        potential("W0", "potential"),
        num("E0", 1.0, "semiclassical energy"),
        num("h", 0.05, "semiclassical parameter", 0.0, true),
        num("T", 1.0, "rho_hat plateau half-width", 0.0, true),
        pairs("pairs", {{0.0, 0.0}, {0.3, 0.0}, {-0.5, 0.5}, {1.0, 0.2}}, "kernel points (x, y)")}},
  };
  return s;
}

const std::vector<Field>& fields_of(const std::string& kind) {
  const auto it = schemas().find(kind);
  if (it == schemas().end()) throw ConfigError("kind", "unknown experiment kind '" + kind + "'");
  return it->second;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
  return d;
}

void check_range(double d, const Field& f, const std::string& path) {
  if (d < f.lo || (f.lo_open && d == f.lo)) {
    std::ostringstream os;
    os << "must be " << (f.lo_open ? "> " : ">= ") << f.lo;
    throw ConfigError(path, os.str());
  }
  if (d > f.hi) {
    std::ostringstream os;
    os << "must be <= " << f.hi;
    throw ConfigError(path, os.str());
  }
}

json potential_defaults(const std::string& type) {
  if (type == "zero") return json{{"type", "zero"}};
  if (type == "gaussian") return json{{"type", "gaussian"}, {"amplitude", 1.0}, {"width", 1.0}, {"center", 0.0}};
  if (type == "bump") return json{{"type", "bump"}, {"amplitude", 4.0}, {"inner", 1.0}, {"outer", 2.0}};
  if (type == "cosines") return json{{"type", "cosines"}, {"amplitude", 0.1}, {"omega", {1.0, kGolden}}};
  return nullptr;
}

json normalize_potential(const json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError(path, "expected an object with a 'type'");
  if (!v.contains("type") || !v["type"].is_string())
    throw ConfigError(path + ".type", "expected one of zero, gaussian, bump, cosines");
  json out = potential_defaults(v["type"].get<std::string>());
  if (out.is_null()) throw ConfigError(path + ".type", "expected one of zero, gaussian, bump, cosines");
  for (const auto& [key, value] : v.items()) {
    if (key == "type") continue;
    if (!out.contains(key)) throw ConfigError(path + "." + key, "unknown field");
    if (key == "omega") {
      if (!value.is_array() || value.empty()) throw ConfigError(path + ".omega", "expected a nonempty number array");
      for (std::size_t i = 0; i < value.size(); ++i) as_number(value[i], path + ".omega[" + std::to_string(i) + "]");
      out[key] = value;
    } else {
      out[key] = as_number(value, path + "." + key);
    }
  }
  const std::string type = out["type"];
  if (type == "gaussian" && out["width"].get<double>() <= 0) throw ConfigError(path + ".width", "must be > 0");
  if (type == "bump") {
    const double inner = out["inner"], outer = out["outer"];
    if (inner <= 0) throw ConfigError(path + ".inner", "must be > 0");
    if (outer <= inner) throw ConfigError(path + ".outer", "must exceed inner");
  }
  return out;
}

json normalize_field(const Field& f, const json& v, const std::string& path) {
  switch (f.type) {
    case FieldType::number: {
      const double d = as_number(v, path);
      check_range(d, f, path);
      return d;
    }
    case FieldType::integer: {
      if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
      const auto i = v.get<std::int64_t>();
      check_range(static_cast<double>(i), f, path);
      return i;
    }
    case FieldType::boolean:
      if (!v.is_boolean()) throw ConfigError(path, "expected a boolean");
      return v;
    case FieldType::numbers: {
      if (!v.is_array()) throw ConfigError(path, "expected a number array");
      if (v.size() < f.min_items || v.size() > f.max_items) {
        std::ostringstream os;
        os << "expected between " << f.min_items << " and " << f.max_items << " entries";
        throw ConfigError(path, os.str());
      }
      json out = json::array();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        const double d = as_number(v[i], p);
        check_range(d, f, p);
        out.push_back(d);
      }
      return out;
    }
    case FieldType::pairs: {
      if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a nonempty array of [x, y]");
      json out = json::array();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        if (!v[i].is_array() || v[i].size() != 2) throw ConfigError(p, "expected [x, y]");
        out.push_back({as_number(v[i][0], p + "[0]"), as_number(v[i][1], p + "[1]")});
      }
      return out;
    }
    case FieldType::potential:
      return normalize_potential(v, path);
  }
  return v;
}

// Preconditions that couple several fields of one kind.
void cross_checks(const std::string& kind, const json& p) {
  const auto inside = [&](double L) {
    for (std::size_t i = 0; i < p["pairs"].size(); ++i)
      for (int c = 0; c < 2; ++c)
        if (std::abs(p["pairs"][i][c].get<double>()) >= L)
          throw ConfigError("params.pairs[" + std::to_string(i) + "][" + std::to_string(c) + "]",
                            "must lie strictly inside (-L, L)");
  };
  if (kind == "gauge-sweep") {
    if (p["box_size"].get<std::int64_t>() % 2 != 0) throw ConfigError("params.box_size", "must be even");
    if (p["band"][1].get<double>() <= p["band"][0].get<double>())
      throw ConfigError("params.band[1]", "must exceed band[0]");
  } else if (kind == "embed") {
    const auto& k = p["kappas"];
    for (std::size_t i = 0; i < k.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (k[i] == k[j]) throw ConfigError("params.kappas[" + std::to_string(i) + "]", "wavenumbers must be distinct");
    if (p["m_max"].get<std::int64_t>() > static_cast<std::int64_t>(k.size()))
      throw ConfigError("params.m_max", "cannot exceed the number of wavenumbers");
    if (p["far"].get<double>() < p["check_L"].get<double>()) throw ConfigError("params.far", "must be >= check_L");
  } else if (kind == "kernel-sweep" || kind == "wave-vs-eig") {
    inside(p["L"]);
  } else if (kind == "fit") {
    inside(p["L"]);
    if (p["lambda_hi"].get<double>() <= p["lambda_lo"].get<double>())
      throw ConfigError("params.lambda_hi", "must exceed lambda_lo");
  }
}

std::function<double(double)> make_potential(const json& spec) {
  const std::string type = spec["type"];
  if (type == "gaussian") {
    const double a = spec["amplitude"], w = spec["width"], c = spec["center"];
    return [=](double x) { return a * std::exp(-(x - c) * (x - c) / (w * w)); };
  }
  if (type == "bump") {
    const double a = spec["amplitude"], inner = spec["inner"], outer = spec["outer"];
    return [=](double x) { return a * cutoff::plateau(x, inner, outer); };
  }
  if (type == "cosines") {
    const double a = spec["amplitude"];
    const auto omega = spec["omega"].get<std::vector<double>>();
    return [=](double x) {
      double s = 0;
      for (double w : omega) s += std::cos(w * x);
      return a * s;
    };
  }
  return nullptr;
}

std::vector<std::pair<double, double>> to_pairs(const json& j) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : j) out.emplace_back(p[0].get<double>(), p[1].get<double>());
  return out;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  Csv(const fs::path& path, const std::vector<std::string>& header) : os_(path) {
    if (!os_) throw Error("cannot write " + path.string());
    row_strings(header);
  }
  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << g17(values[i]);
    os_ << '\n';
  }

 private:
  void row_strings(const std::vector<std::string>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << values[i];
    os_ << '\n';
  }
  std::ofstream os_;
};

struct Context {
  const json& config;
  const json& params;
  fs::path out;
  std::vector<std::string> artifacts;

  fs::path file(const std::string& name) {
    artifacts.push_back(name);
    return out / name;
  }
};

json run_diophantine(Context& ctx) {
  const auto& p = ctx.params;
  const auto omega = p["omega"].get<std::vector<double>>();
  const auto r = diophantine_constant(omega, p["n_max"].get<int>(), p["mu"].get<double>());
  return {{"omega", omega},        {"n_max", p["n_max"]}, {"mu", p["mu"]},
          {"c", r.c},              {"witness", r.witness}, {"resonant", r.c == 0.0},
          {"lattice_norm", "euclidean"}};
}

json run_weights(Context& ctx) {
  const auto& p = ctx.params;
  const auto seed = ctx.config["seed"].get<std::uint64_t>();
  const auto set = make_quasi_periodic(p["omega"].get<std::vector<double>>(), p["n_max"].get<int>());
  const double decay = p["decay"];
  std::vector<std::pair<double, double>> v;
  for (std::size_t i = 0; i < set.size(); ++i) {
    double norm2 = 0;
    if (!set.labels()[i].empty())
      for (auto n : set.labels()[i].front()) norm2 += static_cast<double>(n * n);
    v.emplace_back(set.elements()[i], std::pow(1.0 + norm2, -0.5 * decay));
  }
  const SeminormTable table(v);

  const auto tuples = random_tuples(table, {p["trials"].get<std::size_t>(), p["k_max"].get<int>(), seed});
  const auto basic = check_basic_bound(tuples, table);
  json constants = json::object();
  for (std::size_t k = 1; k < basic.min_constant.size(); ++k)
    constants[std::to_string(k)] = {{"C", basic.min_constant[k]}, {"N", basic.exponent[k]}};

  const auto induct = check_induct(table, p["induct_trials"].get<std::size_t>(), p["nk_max"].get<int>(), seed + 1);

  const auto adm = admissibility_report(std::vector<SeminormTable>{table}, p["admissibility_k_max"].get<int>());
  {
    std::ofstream os(ctx.file("admissibility.csv"));
    write_csv(os, adm);
  }
  return {{"frequencies", set.size()},
          {"basic_bound",
           {{"pass", basic.pass}, {"cases", basic.cases}, {"vacuous", basic.vacuous}, {"constants", constants}}},
          {"induct", {{"cases", induct.cases}, {"violations", induct.violations}}},
          {"admissibility_warnings", adm.warnings}};
}

json run_gauge_sweep(Context& ctx) {
  const auto& p = ctx.params;
  const PeriodicBox box{p["box_length"].get<double>(), p["box_size"].get<std::size_t>()};
  box.validate();
  const double theta = p["theta"], amp = p["amplitude"], width = p["width"];
  const std::pair<double, double> band{p["band"][0].get<double>(), p["band"][1].get<double>()};
  const double half = std::max(8.0 * width, 0.5 * box.length + 1.0);
  const auto W = CoefficientFamily::from_function(
      UniformGrid::linspace(-half, half, static_cast<std::size_t>(std::ceil(200.0 * half)) + 1), {-theta, theta},
      [=](double, double x) { return cplx(amp * std::exp(-x * x / (width * width))); });
  const int truncation = p["truncation"];
  const bool oracle = p["exact_oracle"], symbols = p["write_symbols"];

  Csv csv(ctx.file("gauge_steps.csv"), {"h", "pre_offdiag_norm", "residual_offdiag_norm", "gain",
                                        "self_adjoint_defect", "eigenvalue_defect"});
  json steps = json::array();
  std::vector<double> log_h, log_res;
  const auto hs = p["hs"].get<std::vector<double>>();
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const double h = hs[i];
    const auto step = gauge_step(box, W, band, h, truncation);
    json j = step.to_json();
    double eig_defect = std::nan("");
    if (oracle) {
      const auto gens = gauge_generator(W, band, h, box);
      const auto G = generator_matrix(box, gens, h);
      const auto P0 = free_operator(box, h);
      std::vector<double> wx(box.size);
      for (std::size_t n = 0; n < box.size; ++n) wx[n] = W.evaluate(box.x()[n]).real();
      const auto P = P0.with_matrix(P0.matrix + h * multiplication_operator(box, wx, h).matrix, true);
      const auto ev0 = eigenvalues(P), ev1 = eigenvalues(conjugate_exact(P, G));
      eig_defect = (ev0 - ev1).cwiseAbs().maxCoeff() / ev0.cwiseAbs().maxCoeff();
      j["eigenvalue_defect"] = eig_defect;
    }
    if (symbols) {
      json files = json::object();
      for (const auto& [t, g] : step.generators) {
        const std::string name = "generator_h" + std::to_string(i) + (t < 0 ? "_minus" : "_plus") + ".bin";
        std::ofstream os(ctx.file(name), std::ios::binary);
        g.write_binary(os);
        files[g17(t)] = name;
      }
      const std::string nd = "new_diagonal_h" + std::to_string(i) + ".bin";
      std::ofstream os(ctx.file(nd), std::ios::binary);
      step.new_diagonal.write_binary(os);
      j["symbol_files"] = {{"generators", files}, {"new_diagonal", nd}};
    }
    csv.row({h, step.pre_offdiag_norm, step.residual_offdiag_norm,
             step.residual_offdiag_norm / step.pre_offdiag_norm, step.self_adjoint_defect, eig_defect});
    log_h.push_back(std::log(h));
    log_res.push_back(std::log(step.residual_offdiag_norm));
    steps.push_back(std::move(j));
  }
  json report{{"steps", steps}, {"box", {{"length", box.length}, {"size", box.size}}}};
  if (hs.size() >= 2) report["residual_slope"] = regression_slope(log_h, log_res);
  return report;
}

json run_embed(Context& ctx) {
  const auto& p = ctx.params;
  const auto kappas = p["kappas"].get<std::vector<double>>();
  EmbedConfig cfg;
  cfg.m_max = p["m_max"].get<int>() == 0 ? static_cast<int>(kappas.size()) : p["m_max"].get<int>();
  cfg.stability_power = p["stability_power"];
  cfg.enforce_budget = p["enforce_budget"];
  cfg.far = p["far"];
  cfg.R_limit = p["R_limit"];
  cfg.measure_extent = p["check_L"];
  cfg.sample_step = p["sample_step"];
  const auto build = build_embedded(kappas, cfg);
  const double L = p["check_L"];
  const auto N = p["check_N"].get<std::size_t>();

  {
    Csv csv(ctx.file("potential.csv"), {"x", "W"});
    const double dx = p["sample_step"];
    const auto n = static_cast<std::size_t>(std::floor(L / dx));
    for (std::size_t i = 0; i <= n; ++i) csv.row({dx * double(i), build.plan.W(dx * double(i))});
  }
  json levels = json::array();
  for (std::size_t i = 0; i < build.eigenfunctions.size(); ++i) {
    const auto& ef = build.eigenfunctions[i];
    const std::string name = "eigenfunction_" + std::to_string(i) + ".csv";
    Csv csv(ctx.file(name), {"x", "u", "du"});
    for (std::size_t s = 0; s < ef.x.size(); ++s) csv.row({ef.x[s], ef.u[s], ef.du[s]});
    json level{{"kappa", ef.kappa}, {"boundary_value", ef.boundary_value}, {"peak", ef.peak}, {"samples", name}};
    if (N > 0) level["truncated_check"] = truncated_eigen_check(build, i, L, N).to_json();
    level["verification"] = verify_embedded(build.W(), ef.kappa, L, build.plan.phases[i]).to_json();
    levels.push_back(std::move(level));
  }
  return {{"plan", build.plan.to_json()}, {"levels", levels}};
}

json run_kernel_sweep(Context& ctx) {
  const auto& p = ctx.params;
  const auto W0 = make_potential(p["W0"]);
  const auto op = discretize(W0, nullptr, p["L"].get<double>(), p["N"].get<std::size_t>());
  const auto lambdas = p["lambdas"].get<std::vector<double>>();
  const auto ks = projector_kernel(op, lambdas, to_pairs(p["pairs"]));
  {
    std::ofstream os(ctx.file("kernel.csv"));
    ks.write_csv(os);
  }
  json snapped = json::array();
  for (const auto& [x, y] : ks.pairs) snapped.push_back({x, y});
  json report{{"operator_hash", op.hash},
              {"ceiling", ks.ceiling},
              {"pairs", snapped},
              {"symmetry_defect", ks.symmetry_defect()},
              {"diagonal_monotone", ks.diagonal_monotone()}};
  if (!W0) {
    // Closed form sin(lambda d) / (pi d), lambda / pi on the diagonal.
    json cmp = json::array();
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      double err = 0, scale = 0;
      for (std::size_t q = 0; q < ks.pairs.size(); ++q) {
        const double d = ks.pairs[q].first - ks.pairs[q].second;
        const double exact = d == 0.0 ? lambdas[l] / kPi : std::sin(lambdas[l] * d) / (kPi * d);
        err = std::max(err, std::abs(ks.values[l][q] - exact));
        scale = std::max(scale, std::abs(exact));
      }
      cmp.push_back({{"lambda", lambdas[l]}, {"max_abs_error", err}, {"relative_error", scale > 0 ? err / scale : err}});
    }
    report["free_comparison"] = cmp;
  }
  return report;
}

json run_fit(Context& ctx) {
  const auto& p = ctx.params;
  const auto op = discretize(make_potential(p["W0"]), nullptr, p["L"].get<double>(), p["N"].get<std::size_t>());
  const double lo = p["lambda_lo"], hi = p["lambda_hi"];
  const auto lambdas = midpoint_lambdas(eigenvalues(op, (hi + 1.0) * (hi + 1.0)), lo, hi);
  const auto ks = projector_kernel(op, lambdas, to_pairs(p["pairs"]));
  {
    std::ofstream os(ctx.file("kernel.csv"));
    ks.write_csv(os);
  }
  const int J = p["J"];
  json fits = json::array();
  for (std::size_t q = 0; q < ks.pairs.size(); ++q) {
    const bool diag = ks.pairs[q].first == ks.pairs[q].second;
    const auto fit = diag ? fit_diagonal(ks, q, J) : fit_offdiagonal(ks, q, J);
    json j = fit.to_json();
    j["operator_hash"] = op.hash;
    if (diag) {
      j["weyl_ratio"] = fit.a[0] * kPi;
    } else {
      j["leading_constant"] = fit.leading_constant();
      j["leading_convention"] = leading_convention(fit.leading_constant());
    }
    try {
      const auto high = diag ? fit_diagonal(ks, q, J + 1) : fit_offdiagonal(ks, q, J + 1);
      j["remainder"] = remainder_order(high, J).to_json();
    } catch (const Error& e) {
      j["remainder"] = {{"error", e.what()}};
    }
    fits.push_back(std::move(j));
  }
  return {{"operator_hash", op.hash}, {"lambda_count", lambdas.size()}, {"fits", fits}};
}

json run_wave_vs_eig(Context& ctx) {
  const auto& p = ctx.params;
  const auto op = discretize(make_potential(p["W0"]), nullptr, p["L"].get<double>(), p["N"].get<std::size_t>());
  WaveConfig cfg;
  cfg.E0 = p["E0"];
  cfg.h = p["h"];
  cfg.T = p["T"];
  const auto pts = to_pairs(p["pairs"]);
  const auto basis = solve(op, 1.5 * std::pow(cfg.psi_outer / cfg.h, 2));
  const auto eig = smoothed_projector_eig(op, basis, cfg, pts);
  const auto wave = smoothed_projector_wave(op, cfg, pts);
  Csv csv(ctx.file("smoothed_projector.csv"), {"x", "y", "eig_re", "eig_im", "wave_re", "wave_im"});
  double err = 0, scale = 0;
  for (std::size_t q = 0; q < pts.size(); ++q) {
    const cplx e = eig.values[0][q], w = wave.values[0][q];
    csv.row({eig.pairs[q].first, eig.pairs[q].second, e.real(), e.imag(), w.real(), w.imag()});
    err = std::max(err, std::abs(e - w));
    scale = std::max(scale, std::abs(e));
  }
  return {{"operator_hash", op.hash},
          {"modes", basis.count()},
          {"max_abs_difference", err},
          {"relative_difference", scale > 0 ? err / scale : err}};
}

const std::map<std::string, std::function<json(Context&)>>& runners() {
  static const std::map<std::string, std::function<json(Context&)>> r = {
      {"diophantine", run_diophantine}, {"weights", run_weights},       {"gauge-sweep", run_gauge_sweep},
      {"embed", run_embed},             {"kernel-sweep", run_kernel_sweep}, {"fit", run_fit},
      {"wave-vs-eig", run_wave_vs_eig}};
  return r;
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k = {"diophantine", "weights", "gauge-sweep", "embed",
                                             "kernel-sweep", "fit", "wave-vs-eig"};
  return k;
}

json experiment_schema(const std::string& kind) {
  json fields = json::object();
  for (const auto& f : fields_of(kind)) {
    json e{{"type", type_name(f.type)}, {"default", f.fallback}, {"description", f.doc}};
    if (f.lo > -kInf) e[f.lo_open ? "exclusive_minimum" : "minimum"] = f.lo;
    if (f.hi < kInf) e["maximum"] = f.hi;
    if (f.type == FieldType::potential)
      e["variants"] = {potential_defaults("zero"), potential_defaults("gaussian"), potential_defaults("bump"),
                       potential_defaults("cosines")};
    fields[f.name] = std::move(e);
  }
  return {{"kind", kind},
          {"config", {{"kind", kind}, {"seed", "integer >= 0, default 1"}, {"out", "optional output directory"},
                      {"params", "object; fields below"}}},
          {"params", fields}};
}

json validate_config(const json& config) {
  if (!config.is_object()) throw ConfigError("config", "expected a JSON object");
  for (const auto& [key, value] : config.items())
    if (key != "kind" && key != "seed" && key != "params" && key != "out") throw ConfigError(key, "unknown field");
  if (!config.contains("kind") || !config["kind"].is_string()) throw ConfigError("kind", "expected a string");
  const std::string kind = config["kind"];
  const auto& fields = fields_of(kind);

  json out{{"kind", kind}, {"seed", 1}};
  if (config.contains("seed")) {
    if (!config["seed"].is_number_integer() || config["seed"].get<std::int64_t>() < 0) throw ConfigError("seed", "expected an integer >= 0");
    out["seed"] = config["seed"];
  }
  if (config.contains("out")) {
    if (!config["out"].is_string()) throw ConfigError("out", "expected a path string");
    out["out"] = config["out"];
  }
  const json given = config.value("params", json::object());
  if (!given.is_object()) throw ConfigError("params", "expected an object");
  for (const auto& [key, value] : given.items())
    if (std::none_of(fields.begin(), fields.end(), [&](const Field& f) { return f.name == key; }))
      throw ConfigError("params." + key, "unknown field");
  json params = json::object();
  for (const auto& f : fields) {
    const std::string path = "params." + f.name;
    params[f.name] = normalize_field(f, given.contains(f.name) ? given[f.name] : f.fallback, path);
  }
  cross_checks(kind, params);
  out["params"] = params;
  return out;
}

std::string config_hash(const json& normalized) {
  json j = normalized;
  j.erase("out");
  const std::string s = j.dump();
  return hex64(fnv1a(s.data(), s.size()));
}

json version_info() {
  lapack_int major = 0, minor = 0, patch = 0;
  LAPACKE_ilaver(&major, &minor, &patch);
  const auto dotted = [](auto a, auto b, auto c) {
    return std::to_string(a) + "." + std::to_string(b) + "." + std::to_string(c);
  };
  return {{"apspec", APSPEC_VERSION},
          {"eigen", dotted(EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
          {"boost", dotted(BOOST_VERSION / 100000, BOOST_VERSION / 100 % 1000, BOOST_VERSION % 100)},
          {"nlohmann_json", dotted(NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                   NLOHMANN_JSON_VERSION_PATCH)},
          {"lapack", dotted(major, minor, patch)},
          {"compiler", __VERSION__}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

json error_json(const std::exception& e) {
  json err{{"message", e.what()}};
  if (const auto* c = dynamic_cast<const ConfigError*>(&e)) {
    err = {{"type", "validation"}, {"field", c->field()}, {"message", c->message()}};
  } else if (dynamic_cast<const InvalidArgument*>(&e)) {
    err["type"] = "invalid_argument";
  } else if (dynamic_cast<const NonConvergence*>(&e)) {
    err["type"] = "non_convergence";
  } else if (dynamic_cast<const ResolutionError*>(&e)) {
    err["type"] = "resolution";
  } else {
    err["type"] = "internal";
  }
  return {{"status", "error"}, {"error", err}};
}

ExperimentOutcome run_experiment(const json& config, const fs::path& out) {
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(out);
  json manifest{{"versions", version_info()}};
  const auto finish = [&](ExperimentOutcome& o) {
    manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest["artifacts"] = o.artifacts;
    write_json(out / "manifest.json", manifest);
    o.manifest = manifest;
  };
  ExperimentOutcome outcome;
  try {
    const json normalized = validate_config(config);
    manifest["kind"] = normalized["kind"];
    manifest["seed"] = normalized["seed"];
    manifest["config_hash"] = config_hash(normalized);
    manifest["config"] = normalized;
    Context ctx{normalized, normalized["params"], out, {}};
    json report = runners().at(normalized["kind"].get<std::string>())(ctx);
    report["kind"] = normalized["kind"];
    report["config_hash"] = manifest["config_hash"];
    write_json(out / "report.json", report);
    ctx.artifacts.insert(ctx.artifacts.begin(), "report.json");
    outcome.report = std::move(report);
    outcome.artifacts = std::move(ctx.artifacts);
    manifest["status"] = "ok";
  } catch (const std::exception& e) {
    manifest["status"] = "error";
    manifest["error"] = error_json(e)["error"];
    finish(outcome);
    throw;
  }
  finish(outcome);
  return outcome;
}

}  // namespace apspec

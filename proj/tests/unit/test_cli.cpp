#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "apspec/experiments.hpp"

using namespace apspec;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("apspec_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string field_of(const json& config) {
  try {
    validate_config(config);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("schemas and validation") {
  for (const auto& kind : experiment_kinds()) {
    const auto s = experiment_schema(kind);
    CHECK(s["kind"] == kind);
    CHECK(!s["params"].empty());
    // Every default satisfies its own schema.
    CHECK_NOTHROW(validate_config(json{{"kind", kind}}));
  }
  CHECK(field_of(json{{"kind", "nope"}}) == "kind");
  CHECK(field_of(json{{"kind", "kernel-sweep"}, {"params", {{"L", -1.0}}}}) == "params.L");
  CHECK(field_of(json{{"kind", "kernel-sweep"}, {"params", {{"N", 4.5}}}}) == "params.N");
  CHECK(field_of(json{{"kind", "kernel-sweep"}, {"params", {{"typo", 1}}}}) == "params.typo");
  CHECK(field_of(json{{"kind", "kernel-sweep"}, {"params", {{"L", 2.0}, {"pairs", {{0.0, 3.0}}}}}}) ==
        "params.pairs[0][1]");
  CHECK(field_of(json{{"kind", "fit"}, {"params", {{"W0", {{"type", "gaussian"}, {"width", 0.0}}}}}}) ==
        "params.W0.width");
  CHECK(field_of(json{{"kind", "gauge-sweep"}, {"params", {{"band", {2.0, 1.0}}}}}) == "params.band[1]");
  CHECK(field_of(json{{"kind", "embed"}, {"params", {{"kappas", {1.0, 1.0}}}}}) == "params.kappas[1]");
  CHECK(field_of(json{{"kind", "weights"}, {"seed", -3}}) == "seed");
  CHECK(field_of(json{{"kind", "weights"}, {"extra", 0}}) == "extra");

  const auto n = validate_config(json{{"kind", "diophantine"}, {"params", {{"n_max", 5}}}});
  CHECK(n["params"]["mu"] == 1.0);
  CHECK(n["seed"] == 1);
  // The output directory does not enter the hash.
  auto moved = n;
  moved["out"] = "elsewhere";
  CHECK(config_hash(moved) == config_hash(n));
  auto reseeded = n;
  reseeded["seed"] = 2;
  CHECK(config_hash(reseeded) != config_hash(n));

  const auto err = error_json(ConfigError("params.L", "must be > 0"));
  CHECK(err["status"] == "error");
  CHECK(err["error"]["field"] == "params.L");
  CHECK(err["error"]["type"] == "validation");
}

TEST_CASE("run: diophantine report against a brute-force lattice scan") {
  const auto out = scratch("dioph");
  const auto r = run_experiment(json{{"kind", "diophantine"}}, out);
  const double phi = 0.5 * (1 + std::sqrt(5.0));
  double best = kInf;
  for (int a = -1000; a <= 1000; ++a)
    for (int b = 0; b <= 1000; ++b)
      if (a != 0 || b != 0) best = std::min(best, std::abs(a + b * phi) * std::hypot(double(a), double(b)));
  CHECK(r.report["c"].get<double>() == doctest::Approx(best).epsilon(1e-12));
  // Frozen from an exact scan: (987, 610) attains 0.85065080835208687. The Fibonacci pairs from
  // (377, 233) on differ by < 3e-12, below the rounding of |n . omega| in doubles.
  CHECK(r.report["c"].get<double>() == doctest::Approx(0.85065080835208687).epsilon(1e-9));
  const auto w = r.report["witness"].get<std::vector<std::int64_t>>();
  CHECK(std::abs(w[0]) >= 377);
  CHECK(std::abs(w[0]) + std::abs(w[1]) <= 1597);
  CHECK(std::abs(std::abs(w[0]) - std::abs(w[1]) * phi) * std::abs(w[1]) < 0.5);

  const auto manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["config_hash"] == r.report["config_hash"]);
  CHECK(manifest["versions"].contains("eigen"));
  CHECK(manifest["wall_time_s"].get<double>() >= 0.0);
}

TEST_CASE("run: free kernel sweep matches the closed form and is byte-deterministic") {
  const json cfg{{"kind", "kernel-sweep"}, {"params", {{"L", 100.0}, {"N", 4000}, {"lambdas", {2.0}}}}};
  const auto a = scratch("kernel_a"), b = scratch("kernel_b");
  const auto r = run_experiment(cfg, a);
  run_experiment(cfg, b);
  CHECK(r.report["free_comparison"][0]["relative_error"].get<double>() <= 0.02);
  CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
  CHECK(slurp(a / "kernel.csv") == slurp(b / "kernel.csv"));
  // 17 significant digits in CSV text.
  std::ifstream is(a / "kernel.csv");
  std::string header, line;
  std::getline(is, header);
  std::getline(is, line);
  CHECK(header == "lambda,x,y,re,im");
  CHECK(line.rfind("2,", 0) == 0);
}

TEST_CASE("run: invalid configs and numerical failures still write a manifest") {
  const auto out = scratch("bad");
  CHECK_THROWS_AS(run_experiment(json{{"kind", "kernel-sweep"}, {"params", {{"L", -1.0}}}}, out), ConfigError);
  const auto m = json::parse(slurp(out / "manifest.json"));
  CHECK(m["status"] == "error");
  CHECK(m["error"]["field"] == "params.L");
  CHECK_FALSE(fs::exists(out / "report.json"));

  // Too coarse a box for the band: a resolution failure, not a validation one.
  const auto out2 = scratch("coarse");
  CHECK_THROWS_AS(run_experiment(json{{"kind", "gauge-sweep"}, {"params", {{"box_size", 64}, {"hs", {0.0625}}}}}, out2),
                  ResolutionError);
  CHECK(json::parse(slurp(out2 / "manifest.json"))["error"]["type"] == "resolution");
}

TEST_CASE("run: remaining kinds at small sizes") {
  SUBCASE("weights") {
    const auto out = scratch("weights");
    const auto r = run_experiment(
        json{{"kind", "weights"}, {"seed", 5}, {"params", {{"n_max", 2}, {"trials", 200}, {"induct_trials", 40}}}}, out);
    CHECK(r.report["basic_bound"]["pass"] == true);
    CHECK(r.report["induct"]["violations"] == 0);
    CHECK(fs::exists(out / "admissibility.csv"));
  }
  SUBCASE("gauge-sweep") {
    const auto out = scratch("gauge");
    const auto r = run_experiment(
        json{{"kind", "gauge-sweep"}, {"params", {{"box_size", 256}, {"hs", {0.25, 0.125}}}}}, out);
    REQUIRE(r.report["steps"].size() == 2);
    for (const auto& s : r.report["steps"]) {
      CHECK(s["residual_offdiag_norm"].get<double>() < s["pre_offdiag_norm"].get<double>());
      CHECK(s["eigenvalue_defect"].get<double>() <= 1e-9);
      CHECK(fs::exists(out / s["symbol_files"]["new_diagonal"].get<std::string>()));
    }
    CHECK(r.report.contains("residual_slope"));
  }
  SUBCASE("wave-vs-eig") {
    const auto out = scratch("wave");
    const auto r = run_experiment(json{{"kind", "wave-vs-eig"}}, out);
    CHECK(r.report["relative_difference"].get<double>() <= 1e-2);
  }
  SUBCASE("fit") {
    const auto out = scratch("fit");
    const auto r = run_experiment(json{{"kind", "fit"}, {"params", {{"N", 8001}, {"pairs", {{0.0, 0.0}}}}}}, out);
    CHECK(std::abs(r.report["fits"][0]["weyl_ratio"].get<double>() - 1.0) <= 0.02);
  }
  SUBCASE("embed") {
    const auto out = scratch("embed");
    const auto r = run_experiment(json{{"kind", "embed"}, {"params", {{"check_N", 4001}}}}, out);
    const auto& lvl = r.report["levels"][0];
    CHECK(lvl["boundary_value"].get<double>() <= 1e-6);
    CHECK(lvl["verification"]["classification"] == "embedded");
    CHECK(fs::exists(out / "eigenfunction_0.csv"));
    CHECK(fs::exists(out / "potential.csv"));
  }
}

// Batch experiment driver: run <config.json>, validate <config.json>, schema <kind>.
// Exit codes: 0 success, 2 invalid config, 3 numerical failure, 1 anything else.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "apspec/experiments.hpp"

namespace {

using nlohmann::json;

json load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw apspec::ConfigError("config", "cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw apspec::ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const apspec::InvalidArgument*>(&e)) return 2;
  if (dynamic_cast<const apspec::Error*>(&e)) return 3;
  return 1;
}

int fail(const std::exception& e) {
  std::cout << apspec::error_json(e).dump(2) << '\n';
  return exit_code(e);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"apspec experiment driver"};
  app.require_subcommand(1);
  std::string config_path, kind, out_dir;

  auto* run = app.add_subcommand("run", "run an experiment and write its artifacts");
  run->add_option("config", config_path, "config JSON")->required();
  run->add_option("--out", out_dir, "output directory (overrides the config's out; default: out)");
  auto* validate = app.add_subcommand("validate", "check a config and print it with defaults filled");
  validate->add_option("config", config_path, "config JSON")->required();
  auto* schema = app.add_subcommand("schema", "print the parameter table of an experiment kind");
  schema->add_option("kind", kind, "experiment kind")->required();

  CLI11_PARSE(app, argc, argv);

  if (*schema) {
    try {
      std::cout << apspec::experiment_schema(kind).dump(2) << '\n';
      return 0;
    } catch (const std::exception& e) {
      return fail(e);
    }
  }

  json config;
  try {
    config = load(config_path);
  } catch (const std::exception& e) {
    return fail(e);
  }

  if (*validate) {
    try {
      const json normalized = apspec::validate_config(config);
      std::cout << json{{"status", "ok"}, {"config_hash", apspec::config_hash(normalized)}, {"config", normalized}}.dump(2)
                << '\n';
      return 0;
    } catch (const std::exception& e) {
      return fail(e);
    }
  }

  if (out_dir.empty()) out_dir = config.is_object() && config.contains("out") && config["out"].is_string()
                                     ? config["out"].get<std::string>()
                                     : std::string("out");
  try {
    const auto outcome = apspec::run_experiment(config, out_dir);
    std::cout << json{{"status", "ok"},
                      {"out", out_dir},
                      {"config_hash", outcome.manifest["config_hash"]},
                      {"artifacts", outcome.artifacts},
                      {"wall_time_s", outcome.manifest["wall_time_s"]}}
                     .dump(2)
              << '\n';
    return 0;
  } catch (const std::exception& e) {
    return fail(e);
  }
}

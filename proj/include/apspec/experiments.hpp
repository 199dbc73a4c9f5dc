#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "apspec/common.hpp"

namespace apspec {

/// A configuration field is missing, mistyped or outside its module precondition.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string field, const std::string& message)
      : InvalidArgument(field + ": " + message), field_(std::move(field)), message_(message) {}
  const std::string& field() const { return field_; }
  const std::string& message() const { return message_; }

 private:
  std::string field_, message_;
};

/// diophantine, weights, gauge-sweep, embed, kernel-sweep, fit, wave-vs-eig.
const std::vector<std::string>& experiment_kinds();

/// Field table of one kind: type, default, bounds and a one-line description per parameter.
nlohmann::json experiment_schema(const std::string& kind);

/// Config {"kind", "seed", "params", "out"?} with every default filled in. Throws ConfigError
/// naming the offending field ("kind", "seed", "params.L", "params.W0.width", ...).
nlohmann::json validate_config(const nlohmann::json& config);

/// FNV-1a of the normalized config without "out", as 16 hex digits.
std::string config_hash(const nlohmann::json& normalized);

struct ExperimentOutcome {
  nlohmann::json report;
  std::vector<std::string> artifacts;  // file names relative to the output directory
  nlohmann::json manifest;
};

/// Validates, runs the pipeline, writes report.json, the kind's CSV/JSON/binary artifacts and
/// manifest.json under out. Identical config and seed give byte-identical report.json.
ExperimentOutcome run_experiment(const nlohmann::json& config, const std::filesystem::path& out);

/// {"status": "error", "error": {"type", "field"?, "message"}} for a caught exception.
nlohmann::json error_json(const std::exception& e);

/// Library and toolchain versions recorded in every manifest.
nlohmann::json version_info();

/// Writes j with a trailing newline; doubles use the shortest round-trip form.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace apspec

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dobcbf/report.hpp"
#include "dobcbf/simulator.hpp"
#include "json.hpp"

namespace dobcbf::experiments {

/// Scenario ids understood by the registry.
std::vector<std::string> scenario_ids();

/// Raised for malformed or unknown configuration input (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A scenario id plus its fully resolved parameter document.
///
/// The document always carries every key of the scenario's default; parsing
/// rejects keys the default does not have, and values whose type differs
/// from the default (numbers marked "auto" accept either form).
class ScenarioConfig {
 public:
  static ScenarioConfig defaults(std::string_view scenario_id);
  static ScenarioConfig parse(std::string_view text);
  static ScenarioConfig load(const std::filesystem::path& path);

  const std::string& scenario() const { return scenario_; }
  const nlohmann::json& doc() const { return doc_; }

  /// Dotted-path assignment, e.g. set("filter.beta", "12"). `value_text` is
  /// read as JSON when it parses, otherwise as a bare string.
  void set(std::string_view key, std::string_view value_text);
  void set_json(std::string_view key, const nlohmann::json& value);

  std::string serialize() const;

 private:
  ScenarioConfig(std::string scenario, nlohmann::json doc);

  std::string scenario_;
  nlohmann::json doc_;
};

struct Invariant {
  Check check;
  bool enforced = false;
};

enum class ExitCode : int {
  kPass = 0,
  kInvariantFailure = 1,
  kConfigError = 2,
  kNumericalFailure = 3,
};

struct RunOutcome {
  std::string scenario;
  nlohmann::json resolved;  // config with every "auto" replaced by its value
  SimResult sim;
  Metrics summary;
  Report validation;
  bool certified = false;
  std::vector<Invariant> invariants;
  // Extra scalars reported with the metrics (ultimate bound, mu bounds, ...).
  nlohmann::json derived;
  std::vector<int> position_indices;
  std::string position_label;
  std::string input_label;

  ExitCode exit_code() const;
  nlohmann::json metrics_json() const;
  nlohmann::json validation_json() const;
};

/// Validation report only (no simulation).
Report validate_scenario(const ScenarioConfig& cfg, bool* certified = nullptr);

RunOutcome run_scenario(const ScenarioConfig& cfg);

/// trajectory.csv, metrics.json, validation.json, config.json and plots/.
void write_outputs(const RunOutcome& out, const std::filesystem::path& dir);

/// One CSV per figure panel: each tracked position, h, disturbance vs
/// estimate, each control input. Returns the written paths.
std::vector<std::filesystem::path> emit_plotdata(const RunOutcome& out,
                                                 const std::filesystem::path& dir);

/// Paired comparison of two output directories written by write_outputs.
/// Throws ConfigError when the runs differ in plant, disturbance, nominal
/// law, initial state or simulation grid.
nlohmann::json compare(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b);

}  // namespace dobcbf::experiments

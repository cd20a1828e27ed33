#pragma once

#include "specflow/errors.hpp"
#include "specflow/spectral_flow.hpp"
#include "specflow/weights.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace specflow::cli {

/// Malformed or inconsistent configuration (exit status 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ScenarioKind { bounded_path, unbounded_path, loop_test, exactness_test, doi_check, retract_test, selftest };

std::string to_string(ScenarioKind kind);

struct Scenario {
  std::string id;
  ScenarioKind kind = ScenarioKind::bounded_path;
  std::uint64_t seed = 0;
  int dim = 1;
  std::vector<double> essential_points{-1.0, 1.0};
  nlohmann::json path_spec = nlohmann::json::object();
  std::vector<WeightSpec> weights;
  double quad_tol = 1e-9;
  int grid = 64;
  std::map<std::string, double> tolerances;
  /// Directory of the config file; relative operator files resolve against it.
  std::filesystem::path base_dir;

  double tolerance(const std::string& name, double fallback) const;
};

struct Config {
  std::vector<Scenario> scenarios;
};

/// Validates the whole document. `seed_override` (SPECFLOW_SEED) replaces
/// every seed in the file. Throws ConfigError.
Config parse_config(const nlohmann::json& doc, std::optional<std::uint64_t> seed_override = std::nullopt,
                    const std::filesystem::path& base_dir = {});
Config load_config(const std::filesystem::path& file, std::optional<std::uint64_t> seed_override = std::nullopt);

WeightSpec parse_weight(const nlohmann::json& j);

struct ScenarioResult {
  std::string id;
  ScenarioKind kind = ScenarioKind::bounded_path;
  int dim = 0;
  bool pass = false;
  /// Names of the violated invariants, with the measured values.
  std::vector<std::string> failures;
  std::optional<SFReport> sf;
  /// Kind-specific measurements (residuals, secondary totals, ...).
  nlohmann::json details = nlohmann::json::object();
  double wall_ms = 0.0;
};

/// Runs one scenario. Numerical errors raised by the library are recorded as
/// failures rather than thrown.
ScenarioResult run_scenario(const Scenario& s);

/// Runs all scenarios on up to `threads` workers; results keep config order.
std::vector<ScenarioResult> run_all(const std::vector<Scenario>& scenarios, int threads);

/// SFReport with the exact field names; wall_time only if `with_timing`.
nlohmann::json to_json(const SFReport& r, bool with_timing = true);

/// Report document; a deterministic function of the scenario (no timing).
nlohmann::json report_json(const ScenarioResult& r);
/// Wall-clock data, kept out of the report so reports compare byte-for-byte.
nlohmann::json timing_json(const ScenarioResult& r);

std::string csv_header();
std::string csv_row(const ScenarioResult& r);
/// RFC 4180 field quoting.
std::string csv_escape(const std::string& field);

/// Writes via a temporary file in the same directory and renames it.
void write_atomic(const std::filesystem::path& file, const std::string& content);

/// Writes <id>.json and <id>.timing.json per scenario and results.csv (or `csv_name`) into `dir`.
void write_outputs(const std::filesystem::path& dir, const std::vector<ScenarioResult>& results,
                   const std::string& csv_name = "results.csv");

/// Sweep ranges: "a:b:n" (n evenly spaced values) or "v1,v2,...".
std::vector<double> parse_range(const std::string& text);

/// Sets `path` (dotted, e.g. "weight.delta" or "scenarios.0.quad_tol") to
/// `value`. Paths not starting with "scenarios" apply to every scenario that
/// already has the parent object; matching none is a ConfigError.
void apply_parameter(nlohmann::json& doc, const std::string& path, double value);

}  // namespace specflow::cli

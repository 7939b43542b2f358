#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace entroq {

inline constexpr const char* kVersion = "0.1.0";

/// Flat `key = value` lines; `#` starts a comment.  Section keys are dotted (space.*, numerics.*,
/// sweeps.*).  List values are comma separated.
struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::map<std::string, std::string> values;
};

/// Syntax only; throws ValidationError on malformed lines or duplicate keys.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Full validation without computation.  Empty means valid.
std::vector<std::string> validate_config(const ExperimentConfig& cfg);

struct ExperimentInfo {
  std::string name;
  std::string description;
  std::vector<std::string> required;
};

/// Sorted by name.
std::vector<ExperimentInfo> experiments();
std::string list_experiments();

/// Closest experiment name by edit distance.
std::string nearest_experiment(const std::string& name);

struct Check {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  /// "<=", ">=", "abs<=" (|measured - target| <= tolerance)
  std::string comparison;
  double target = 0.0;
  bool pass = false;
};

struct RunResult {
  nlohmann::ordered_json manifest;
  bool pass = false;
};

/// Validates, creates output_dir, runs the pipeline and writes manifest.json.  ValidationError and
/// NumericalError propagate to the caller.
RunResult run_experiment(const ExperimentConfig& cfg);

/// Exit code convention: 0 all checks pass, 1 a check failed, 2 invalid input, 3 numerical failure.
int cli_main(int argc, char** argv);

}  // namespace entroq

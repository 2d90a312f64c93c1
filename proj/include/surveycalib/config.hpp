#pragma once

#include "surveycalib/simulate.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace surveycalib {

/// One experiment, as read from a JSON document:
///
///   {
///     "population": {"csv_path": "pop.csv"} | {"synthetic": {...SyntheticPopSpec fields...}},
///     "columns": {"aux": [...], "outcomes": [...]},
///     "design": {"n": 120, "seed": 7},
///     "estimators": ["HT", "full", "pc(5)", {"variant": "ridge", "lambda": "auto"}],
///     "reference": "full",
///     "replicates": 300,
///     "output": {"dir": "out", "per_replicate": false}
///   }
///
/// Only "population" is required. Unknown keys are rejected.
struct RunConfig {
  std::optional<std::string> csv_path;
  std::optional<SyntheticPopSpec> synthetic;
  std::vector<std::string> aux_columns;
  std::vector<std::string> outcome_columns;
  Index sample_size = 0;   // 0: not given
  std::uint64_t seed = 1;
  std::vector<EstimatorSpec> estimators;   // default: HT, full
  std::string reference = "full";
  Index replicates = 1000;
  std::string output_dir = ".";
  bool per_replicate = false;
  Index aux_dim = -1;   // -1 when it could not be determined while parsing
};

/// Parse and validate; throws ConfigError listing every violation.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);

/// The config as a normalized JSON document (defaults filled in).
std::string config_to_json(const RunConfig& config);

/// Check the sample size and the estimator bank against a known auxiliary
/// dimension; throws ConfigError.
void validate_run(const RunConfig& config, Index aux_dim);

PopulationFrame load_population(const RunConfig& config);

}  // namespace surveycalib

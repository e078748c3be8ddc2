#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "coda/evalharness.hpp"
#include "coda/theorem_bound.hpp"
#include "json.hpp"

namespace coda {

using Json = nlohmann::ordered_json;

/// Malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetSpec {
  std::string kind = "moons";  // "moons" or "csv"
  std::size_t domains = 10;
  std::size_t n_per_domain = 200;
  double noise = kMoonsDefaultNoise;
  std::uint64_t seed = 0;
  std::string csv_path;
  CsvSchema schema;
  NormalizationMethod normalization = NormalizationMethod::kMinMax;
};

struct RunConfig {
  DatasetSpec dataset;
  ExperimentConfig experiment;
  std::vector<Method> methods = {Method::kCoda};
  std::string output_dir = "coda-out";
};

Json to_json(const PredictorConfig& c);
Json to_json(const SimulatorConfig& c);
Json to_json(const DownstreamConfig& c);
Json to_json(const PrelimConfig& c);
Json to_json(const ExperimentConfig& c);
Json to_json(const DatasetSpec& c);
Json to_json(const RunConfig& c);
Json to_json(const ExperimentReport& r);
Json to_json(const BoundReport& r);

/// Each parser starts from the defaults, overrides the keys present and throws
/// ConfigError naming any unknown key or wrongly typed value.
PredictorConfig predictor_config_from_json(const Json& j);
SimulatorConfig simulator_config_from_json(const Json& j);
DownstreamConfig downstream_config_from_json(const Json& j);
PrelimConfig prelim_config_from_json(const Json& j);
ExperimentConfig experiment_config_from_json(const Json& j);
DatasetSpec dataset_spec_from_json(const Json& j);
RunConfig run_config_from_json(const Json& j);

/// Reads and parses a run config file. Throws ConfigError (missing file,
/// syntax error, unknown key).
RunConfig load_run_config(const std::filesystem::path& path);

/// Builds (and normalises) the stream described by `spec`.
NormalizedStream load_dataset(const DatasetSpec& spec);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

inline constexpr int kCheckpointVersion = 1;

/// Versioned JSON holding shape-tagged flat parameter arrays plus free-form metadata.
Json checkpoint_to_json(const std::string& kind, const ParamList& params, const Json& meta = {});
/// Restores tensors into `params`, which must already have the matching layout.
void checkpoint_from_json(const Json& j, const std::string& kind, ParamList& params);

}  // namespace coda

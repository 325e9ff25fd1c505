#pragma once

#include "vforge/search.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>

namespace vforge {

struct CsvSource {
  std::filesystem::path path;
  std::string label_column = "label";
};

struct RingsSpec {
  std::size_t num_rings = 2;
  std::size_t samples_per_ring = 100;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

using DatasetSpec = std::variant<BlobsSpec, RingsSpec, CsvSource>;

struct EngineSettings {
  std::string name = "brute";
  EaConfig ea;
  RlConfig rl;
  SmboConfig smbo;
  SwayConfig sway;
};

/// One experiment, loaded from a JSON file. Unknown keys are rejected.
struct ExperimentConfig {
  DatasetSpec dataset = BlobsSpec{};
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  /// input_dim and output_dim are filled from the data.
  ModelConfig model;
  TrainConfig train{60, 16, 0.05, 0};
  PerturbationPool pool;
  /// Level used as "on" by the grid harness, per factor code. Default: last level.
  std::map<std::string, std::size_t> grid_levels;
  EngineSettings engine;
  SearchBudget budget;
  std::uint64_t master_seed = 0;
  std::size_t parallelism = 1;
  std::filesystem::path output_dir = "runs/default";
};

/// Throws ConfigError naming the offending key.
ExperimentConfig parse_experiment(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Pool factor list in the config-file layout.
PerturbationPool parse_pool(const nlohmann::json& j);
nlohmann::json pool_to_json(const PerturbationPool& pool);

Dataset make_dataset(const DatasetSpec& spec);

/// Loads data, splits, and fills model dimensions.
EvaluationContext make_context(const ExperimentConfig& config);

/// Standard desk-scale instance: 3 blob classes x 100 samples in 2-D, one
/// hidden layer of 16, and a 27-strategy pool over F1, F3 and F5.
ExperimentConfig standard_experiment();

}  // namespace vforge

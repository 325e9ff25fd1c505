#pragma once

#include "vforge/experiment.hpp"
#include "vforge/robustness.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace vforge {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  exit_ok = 0,
  exit_config = 2,
  exit_data = 3,
  exit_runtime = 4,
};

/// Evaluation parallelism: VF_PARALLELISM when set, otherwise the config value.
std::size_t effective_parallelism(const ExperimentConfig& config);

/// Trains the clean model; writes summary.json.
nlohmann::json cmd_baseline(const ExperimentConfig& config, std::ostream& out);

/// Every on/off combination of up to four factors at their grid level;
/// writes summary.json and cache.jsonl.
nlohmann::json cmd_grid(const ExperimentConfig& config, const std::vector<FactorKind>& factors,
                        std::ostream& out);

/// Runs the configured engine; writes summary.json, trace.jsonl, trace.csv
/// and cache.jsonl.
nlohmann::json cmd_search(const ExperimentConfig& config, std::ostream& out);

struct CheckOptions {
  std::string strategy;
  std::optional<double> sigma;  // defaults to the strategy's F1 level
  std::optional<double> delta;
  double eta = 0.0;
  double p = std::numeric_limits<double>::infinity();
};

/// Robustness-condition diagnostics for one strategy; writes check.json.
nlohmann::json cmd_check(const ExperimentConfig& config, const CheckOptions& options,
                         std::ostream& out);

nlohmann::json verdict_to_json(const RobustnessVerdict& v);

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace vforge

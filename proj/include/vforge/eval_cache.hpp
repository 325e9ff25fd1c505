#pragma once

#include "vforge/metrics.hpp"
#include "vforge/perturb.hpp"

#include <json.hpp>

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

namespace vforge {

/// Outcome of evaluating one perturbation strategy.
struct EvaluationRecord {
  PerturbationStrategy strategy;
  CcddScore baseline_ccdd;
  CcddScore perturbed_ccdd;
  double pv = 0.0;
  double baseline_accuracy = 0.0;
  double perturbed_accuracy = 0.0;
  std::uint64_t master_seed = 0;
  double wall_time_s = 0.0;
  bool failed = false;
  std::string failure;

  std::string encoding() const { return strategy.encoding(); }

  /// Equality on every field except wall time.
  bool same_result(const EvaluationRecord& other) const;
};

nlohmann::json to_json(const EvaluationRecord& r, bool include_timing = true);
EvaluationRecord record_from_json(const nlohmann::json& j);

/// Thread-safe map from strategy encoding to record, optionally backed by an
/// append-only JSON-lines file. Lines whose fingerprint differs from the
/// cache's are ignored on load.
class EvalCache {
 public:
  explicit EvalCache(std::string fingerprint);
  EvalCache(std::string fingerprint, std::filesystem::path file);

  const std::string& fingerprint() const { return fingerprint_; }

  std::optional<EvaluationRecord> find(const std::string& encoding) const;
  /// Last writer wins; appends to the backing file when there is one.
  void insert(const EvaluationRecord& record);
  std::size_t size() const;

 private:
  std::string fingerprint_;
  std::optional<std::filesystem::path> file_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, EvaluationRecord> records_;
};

}  // namespace vforge

#include "vforge/eval_cache.hpp"

#include <fstream>

namespace vforge {

bool EvaluationRecord::same_result(const EvaluationRecord& o) const {
  return strategy == o.strategy && baseline_ccdd == o.baseline_ccdd &&
         perturbed_ccdd == o.perturbed_ccdd && pv == o.pv &&
         baseline_accuracy == o.baseline_accuracy && perturbed_accuracy == o.perturbed_accuracy &&
         master_seed == o.master_seed && failed == o.failed && failure == o.failure;
}

nlohmann::json to_json(const EvaluationRecord& r, bool include_timing) {
  nlohmann::json j = {
      {"encoding", r.encoding()},
      {"levels", r.strategy.levels},
      {"baseline_ccdd", r.baseline_ccdd.value},
      {"perturbed_ccdd", r.perturbed_ccdd.value},
      {"sample_count", r.perturbed_ccdd.sample_count},
      {"pv", r.pv},
      {"baseline_accuracy", r.baseline_accuracy},
      {"perturbed_accuracy", r.perturbed_accuracy},
      {"master_seed", r.master_seed},
      {"failed", r.failed},
  };
  if (r.failed) j["failure"] = r.failure;
  if (include_timing) j["wall_time_s"] = r.wall_time_s;
  return j;
}

EvaluationRecord record_from_json(const nlohmann::json& j) {
  EvaluationRecord r;
  r.strategy.levels = j.at("levels").get<std::vector<std::size_t>>();
  const auto n = j.at("sample_count").get<std::size_t>();
  r.baseline_ccdd = {j.at("baseline_ccdd").get<double>(), n};
  r.perturbed_ccdd = {j.at("perturbed_ccdd").get<double>(), n};
  r.pv = j.at("pv").get<double>();
  r.baseline_accuracy = j.at("baseline_accuracy").get<double>();
  r.perturbed_accuracy = j.at("perturbed_accuracy").get<double>();
  r.master_seed = j.at("master_seed").get<std::uint64_t>();
  r.failed = j.at("failed").get<bool>();
  r.failure = j.value("failure", std::string{});
  r.wall_time_s = j.value("wall_time_s", 0.0);
  return r;
}

EvalCache::EvalCache(std::string fingerprint) : fingerprint_(std::move(fingerprint)) {}

EvalCache::EvalCache(std::string fingerprint, std::filesystem::path file)
    : fingerprint_(std::move(fingerprint)), file_(std::move(file)) {
  std::ifstream in(*file_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) continue;
    if (j.value("fingerprint", std::string{}) != fingerprint_) continue;
    try {
      EvaluationRecord r = record_from_json(j.at("record"));
      records_.insert_or_assign(r.encoding(), std::move(r));
    } catch (const nlohmann::json::exception&) {
      // A torn final line from an interrupted run; skip it.
    }
  }
}

std::optional<EvaluationRecord> EvalCache::find(const std::string& encoding) const {
  std::lock_guard lock(mutex_);
  auto it = records_.find(encoding);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void EvalCache::insert(const EvaluationRecord& record) {
  std::lock_guard lock(mutex_);
  records_.insert_or_assign(record.encoding(), record);
  if (file_) {
    std::ofstream out(*file_, std::ios::app);
    nlohmann::json line = {{"encoding", record.encoding()},
                           {"fingerprint", fingerprint_},
                           {"record", to_json(record)}};
    out << line.dump() << '\n';
  }
}

std::size_t EvalCache::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

}  // namespace vforge

#include "vforge/search.hpp"

#include <algorithm>
#include <cmath>

namespace vforge {

SearchSession::SearchSession(Evaluator& evaluator, const SearchBudget& budget, std::string engine)
    : evaluator_(evaluator), budget_(budget) {
  budget_.validate();
  trace_.engine = std::move(engine);
}

std::vector<std::optional<EvaluationRecord>> SearchSession::evaluate(
    std::span<const PerturbationStrategy> batch) {
  std::vector<PerturbationStrategy> fresh;
  for (const auto& ps : batch) {
    if (!pool().contains(ps)) {
      throw ConfigError("engine produced strategy '" + ps.encoding() + "' outside the pool");
    }
    if (index_.contains(ps)) continue;
    if (std::find(fresh.begin(), fresh.end(), ps) != fresh.end()) continue;
    if (fresh.size() < remaining()) fresh.push_back(ps);
  }

  if (!fresh.empty()) {
    auto records = evaluator_.evaluate(fresh);
    for (auto& r : records) {
      const double incumbent =
          trace_.entries.empty() ? r.pv : std::max(trace_.entries.back().incumbent_pv, r.pv);
      trace_.entries.push_back({trace_.entries.size(), r.strategy, r.pv, incumbent, r.failed});
      index_.emplace(r.strategy, records_.size());
      records_.push_back(std::move(r));
    }
  }

  std::vector<std::optional<EvaluationRecord>> out;
  out.reserve(batch.size());
  for (const auto& ps : batch) {
    auto it = index_.find(ps);
    out.push_back(it == index_.end() ? std::nullopt
                                     : std::optional<EvaluationRecord>(records_[it->second]));
  }
  return out;
}

std::optional<EvaluationRecord> SearchSession::evaluate(const PerturbationStrategy& ps) {
  return evaluate(std::span<const PerturbationStrategy>(&ps, 1)).front();
}

const EvaluationRecord* SearchSession::seen(const PerturbationStrategy& ps) const {
  auto it = index_.find(ps);
  return it == index_.end() ? nullptr : &records_[it->second];
}

SearchResult SearchSession::finish() && {
  if (records_.empty()) throw ConfigError(trace_.engine + ": no strategy was evaluated");
  std::size_t best = 0;
  for (std::size_t i = 1; i < records_.size(); ++i) {
    if (records_[i].pv > records_[best].pv) best = i;
  }
  return {records_[best], std::move(trace_), std::move(records_)};
}

std::vector<double> encode_real(const PerturbationPool& pool, const PerturbationStrategy& ps) {
  std::vector<double> v(pool.num_factors(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t levels = pool.level_count(i);
    v[i] = levels > 1 ? static_cast<double>(ps.levels[i]) / static_cast<double>(levels - 1) : 0.0;
  }
  return v;
}

PerturbationStrategy decode_real(const PerturbationPool& pool, std::span<const double> values) {
  if (values.size() != pool.num_factors()) throw ShapeError("decode_real: wrong vector length");
  PerturbationStrategy ps{std::vector<std::size_t>(values.size(), 0)};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t levels = pool.level_count(i);
    if (levels <= 1) continue;
    const double x = std::isfinite(values[i]) ? std::clamp(values[i], 0.0, 1.0) : 0.0;
    // floor(v + 0.5) rounds halves upward.
    const double scaled = x * static_cast<double>(levels - 1);
    ps.levels[i] = std::min(levels - 1, static_cast<std::size_t>(std::floor(scaled + 0.5)));
  }
  return ps;
}

BruteForceResult brute_force(Evaluator& evaluator, const SearchBudget& budget) {
  const std::size_t n = evaluator.pool().size();
  if (n > budget.max_evaluations) {
    throw ConfigError("brute force: pool of " + std::to_string(n) +
                      " strategies exceeds the evaluation budget of " +
                      std::to_string(budget.max_evaluations));
  }
  SearchSession session(evaluator, budget, "brute");
  session.evaluate(evaluator.pool().all());
  SearchResult result = std::move(session).finish();

  BruteForceResult out{std::move(result.records), std::move(result.trace)};
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [](const EvaluationRecord& a, const EvaluationRecord& b) {
                     if (a.pv != b.pv) return a.pv > b.pv;
                     return a.strategy < b.strategy;
                   });
  return out;
}

}  // namespace vforge

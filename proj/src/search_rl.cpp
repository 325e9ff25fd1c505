#include "vforge/search.hpp"

#include <algorithm>
#include <cmath>

namespace vforge {

void RlConfig::validate() const {
  if (episodes < 1 || steps_per_episode < 1) {
    throw ConfigError("rl: episodes and steps_per_episode must be >= 1");
  }
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw ConfigError("rl: learning_rate must lie in (0, 1]");
  }
  if (!(discount >= 0.0 && discount <= 1.0)) throw ConfigError("rl: discount must lie in [0, 1]");
  if (!(exploration >= 0.0 && exploration <= 1.0)) {
    throw ConfigError("rl: exploration must lie in [0, 1]");
  }
  if (ccdd_bins < 2) throw ConfigError("rl: ccdd_bins must be >= 2");
}

QLearner::QLearner(std::size_t num_actions, double learning_rate, double discount)
    : num_actions_(num_actions),
      learning_rate_(learning_rate),
      discount_(discount),
      zeros_(num_actions, 0.0) {}

const std::vector<double>& QLearner::values(const State& s) const {
  auto it = table_.find(s);
  return it == table_.end() ? zeros_ : it->second;
}

double QLearner::max_value(const State& s) const {
  const auto& v = values(s);
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

std::size_t QLearner::greedy(const State& s) const {
  const auto& v = values(s);
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double QLearner::update(const State& s, std::size_t action, double reward, const State& next) {
  const double target = reward + discount_ * max_value(next);
  auto [it, inserted] = table_.try_emplace(s, zeros_);
  double& q = it->second.at(action);
  q += learning_rate_ * (target - q);
  return q;
}

std::size_t ccdd_bin(double ccdd, std::size_t bins) {
  const double x = std::clamp(ccdd, -1.0, 0.0) + 1.0;
  return std::min(bins - 1, static_cast<std::size_t>(std::floor(x * static_cast<double>(bins))));
}

std::size_t action_count(const PerturbationPool& pool) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < pool.num_factors(); ++i) n += pool.level_count(i);
  return n;
}

PerturbationStrategy apply_action(const PerturbationPool& pool, const PerturbationStrategy& ps,
                                  std::size_t action) {
  PerturbationStrategy next = ps;
  for (std::size_t i = 0; i < pool.num_factors(); ++i) {
    if (action < pool.level_count(i)) {
      next.levels[i] = action;
      return next;
    }
    action -= pool.level_count(i);
  }
  throw ConfigError("rl: action index out of range");
}

SearchResult search_rl(Evaluator& evaluator, const RlConfig& config, const SearchBudget& budget,
                       QLearner* agent) {
  config.validate();
  SearchSession session(evaluator, budget, "rl");
  const PerturbationPool& pool = evaluator.pool();
  QLearner q(action_count(pool), config.learning_rate, config.discount);
  Rng rng(config.seed);

  auto state_of = [&](const EvaluationRecord& r) {
    return QLearner::State{r.strategy.levels, ccdd_bin(r.perturbed_ccdd.value, config.ccdd_bins)};
  };

  const std::size_t episodes = std::min(config.episodes, session.max_iterations());
  for (std::size_t e = 0; e < episodes; ++e) {
    auto current = session.evaluate(pool.all_off());
    if (!current) break;
    for (std::size_t t = 0; t < config.steps_per_episode; ++t) {
      const QLearner::State s = state_of(*current);
      std::size_t action;
      if (rng.uniform() < config.exploration) {
        action = rng.index(q.num_actions());
      } else {
        // Greedy with uniformly random tie-breaking.
        const auto& v = q.values(s);
        const double best = *std::max_element(v.begin(), v.end());
        std::vector<std::size_t> ties;
        for (std::size_t a = 0; a < v.size(); ++a) {
          if (v[a] == best) ties.push_back(a);
        }
        action = ties[rng.index(ties.size())];
      }
      auto next = session.evaluate(apply_action(pool, current->strategy, action));
      if (!next) break;
      q.update(s, action, next->pv - current->pv, state_of(*next));
      current = std::move(next);
    }
    if (session.exhausted()) break;
  }
  if (agent) *agent = q;
  return std::move(session).finish();
}

}  // namespace vforge

#pragma once

// Search engines over a perturbation pool. Every engine maximizes the
// performance variance reported by an Evaluator.

#include "vforge/evaluator.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vforge {

struct SearchBudget {
  std::size_t max_evaluations = 60;
  std::size_t max_iterations = 100;

  void validate() const {
    if (max_evaluations < 1 || max_iterations < 1) {
      throw ConfigError("budget: max_evaluations and max_iterations must be >= 1");
    }
  }
};

struct TraceEntry {
  std::size_t step = 0;
  PerturbationStrategy strategy;
  double pv = 0.0;
  double incumbent_pv = 0.0;
  bool failed = false;
};

/// Distinct evaluations in the order an engine consumed them.
struct SearchTrace {
  std::string engine;
  std::vector<TraceEntry> entries;

  std::size_t evaluations() const { return entries.size(); }
};

struct SearchResult {
  EvaluationRecord best;
  SearchTrace trace;
  /// Every record consumed, aligned with trace entries.
  std::vector<EvaluationRecord> records;
};

/// Budgeted view of an evaluator for one engine run. Repeated requests for a
/// strategy inside the run are free; only first requests consume budget and
/// enter the trace, so the trace does not depend on shared cache state.
class SearchSession {
 public:
  SearchSession(Evaluator& evaluator, const SearchBudget& budget, std::string engine);

  const PerturbationPool& pool() const { return evaluator_.pool(); }

  /// Records for the requested strategies, or empty entries for strategies
  /// that could not be afforded. New strategies are charged in request order.
  std::vector<std::optional<EvaluationRecord>> evaluate(
      std::span<const PerturbationStrategy> batch);
  std::optional<EvaluationRecord> evaluate(const PerturbationStrategy& ps);

  /// Record from this run, if the strategy was evaluated.
  const EvaluationRecord* seen(const PerturbationStrategy& ps) const;

  std::size_t remaining() const { return budget_.max_evaluations - trace_.entries.size(); }
  bool exhausted() const { return remaining() == 0; }
  std::size_t max_iterations() const { return budget_.max_iterations; }

  /// Best record by pv, ties to the earliest. Throws if nothing was evaluated.
  SearchResult finish() &&;

 private:
  Evaluator& evaluator_;
  SearchBudget budget_;
  SearchTrace trace_;
  std::vector<EvaluationRecord> records_;
  std::map<PerturbationStrategy, std::size_t> index_;
};

/// Ordinal embedding: level k of L maps to k / (L - 1); single-level factors map to 0.
std::vector<double> encode_real(const PerturbationPool& pool, const PerturbationStrategy& ps);
/// Clamps to [0, 1] and rounds to the nearest level, ties upward.
PerturbationStrategy decode_real(const PerturbationPool& pool, std::span<const double> values);

// ---------------------------------------------------------------------------
// Brute force

struct BruteForceResult {
  /// Sorted by pv descending, ties by level vector ascending.
  std::vector<EvaluationRecord> ranked;
  SearchTrace trace;
};

/// Evaluates the whole pool. Throws ConfigError if the pool exceeds the budget.
BruteForceResult brute_force(Evaluator& evaluator, const SearchBudget& budget);

// ---------------------------------------------------------------------------
// Evolutionary search (discrete differential evolution)

struct EaConfig {
  std::size_t population_size = 8;
  std::size_t generations = 10;
  double epsilon = 0.8;           // mutation scale, (0, 1]
  double replacement_rate = 0.3;  // probability of keeping the parent gene
  std::uint64_t seed = 0;

  void validate() const;
};

/// Mutant vector before crossover: clamp(e(r1) + epsilon * (e(r2) - e(r3))), decoded.
PerturbationStrategy de_mutant(const PerturbationPool& pool, const PerturbationStrategy& r1,
                               const PerturbationStrategy& r2, const PerturbationStrategy& r3,
                               double epsilon);

/// Gene j keeps the parent's level when draws[j] < replacement_rate.
PerturbationStrategy de_crossover(const PerturbationStrategy& parent,
                                  const PerturbationStrategy& mutant,
                                  std::span<const double> draws, double replacement_rate);

SearchResult search_ea(Evaluator& evaluator, const EaConfig& config, const SearchBudget& budget);

// ---------------------------------------------------------------------------
// Tabular Q-learning

struct RlConfig {
  std::size_t episodes = 50;
  std::size_t steps_per_episode = 6;
  double learning_rate = 0.5;  // alpha, (0, 1]
  double discount = 0.9;       // gamma, [0, 1]
  double exploration = 0.3;    // epsilon-greedy rate, [0, 1]
  std::size_t ccdd_bins = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Q-table keyed by (level vector, C-CDD bin).
class QLearner {
 public:
  struct State {
    std::vector<std::size_t> levels;
    std::size_t ccdd_bin = 0;
    auto operator<=>(const State&) const = default;
  };

  QLearner(std::size_t num_actions, double learning_rate, double discount);

  /// Zero-initialized row for unseen states.
  const std::vector<double>& values(const State& s) const;
  double max_value(const State& s) const;
  /// Greedy action, ties to the lowest index.
  std::size_t greedy(const State& s) const;

  /// Q(s,a) += alpha * (reward + gamma * max Q(s') - Q(s,a)). Returns the new Q(s,a).
  double update(const State& s, std::size_t action, double reward, const State& next);

  std::size_t num_actions() const { return num_actions_; }
  std::size_t num_states() const { return table_.size(); }

 private:
  std::size_t num_actions_;
  double learning_rate_;
  double discount_;
  std::vector<double> zeros_;
  std::map<State, std::vector<double>> table_;
};

/// Equal-width bin of a C-CDD value over [-1, 0].
std::size_t ccdd_bin(double ccdd, std::size_t bins);

/// Action a sets one factor to one level; actions enumerate (factor, level)
/// pairs factor-major, so there are sum_i L_i of them.
PerturbationStrategy apply_action(const PerturbationPool& pool, const PerturbationStrategy& ps,
                                  std::size_t action);
std::size_t action_count(const PerturbationPool& pool);

/// `agent`, when given, receives the learned table.
SearchResult search_rl(Evaluator& evaluator, const RlConfig& config, const SearchBudget& budget,
                       QLearner* agent = nullptr);

// ---------------------------------------------------------------------------
// Sequential model-based optimization with a Gaussian-process surrogate

struct SmboConfig {
  std::size_t initial_samples = 5;
  std::size_t iterations = 10;
  double length_scale = 0.5;
  double noise = 1e-6;       // observation noise variance on standardized targets
  double exploration = 0.0;  // xi in expected improvement
  std::uint64_t seed = 0;

  void validate() const;
};

/// Zero-mean GP with a squared-exponential kernel on standardized targets.
class GaussianProcess {
 public:
  GaussianProcess(double length_scale, double noise);

  void fit(const std::vector<std::vector<double>>& points, const std::vector<double>& targets);

  struct Prediction {
    double mean = 0.0;
    double stddev = 0.0;
  };
  /// Posterior in the original target units.
  Prediction predict(std::span<const double> point) const;

 private:
  double kernel(std::span<const double> a, std::span<const double> b) const;

  double length_scale_;
  double noise_;
  std::vector<std::vector<double>> points_;
  Eigen::VectorXd alpha_;
  Eigen::MatrixXd chol_l_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
};

/// Expected improvement over `incumbent` for maximization.
double expected_improvement(const GaussianProcess::Prediction& p, double incumbent,
                            double exploration);

SearchResult search_smbo(Evaluator& evaluator, const SmboConfig& config,
                         const SearchBudget& budget);

// ---------------------------------------------------------------------------
// SWAY: recursive east/west splitting on the ordinal embedding

struct SwayConfig {
  std::size_t candidate_sample_size = 0;  // 0 or >= pool size means the whole pool
  std::size_t size_threshold = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

SearchResult search_sway(Evaluator& evaluator, const SwayConfig& config,
                         const SearchBudget& budget);

}  // namespace vforge

#pragma once

#include "vforge/data.hpp"
#include "vforge/eval_cache.hpp"

#include <memory>
#include <span>

namespace vforge {

/// Scores perturbation strategies. Search engines only see this interface.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  virtual const PerturbationPool& pool() const = 0;

  /// Records in request order. Implementations may evaluate a batch
  /// concurrently but results must not depend on that.
  virtual std::vector<EvaluationRecord> evaluate(std::span<const PerturbationStrategy> batch) = 0;

  EvaluationRecord evaluate(const PerturbationStrategy& ps) {
    return evaluate(std::span<const PerturbationStrategy>(&ps, 1)).front();
  }
};

/// Clean-model reference point shared by every strategy in a run.
struct Baseline {
  Parameters model;
  CcddScore ccdd;
  double accuracy = 0.0;
};

/// Everything a strategy evaluation depends on.
struct EvaluationContext {
  PerturbationPool pool;
  SplitDataset data;
  ModelConfig model_config;
  TrainConfig train_config;
  std::uint64_t master_seed = 0;
};

/// Hash over data bytes, configuration, pool definition and master seed.
std::string fingerprint(const EvaluationContext& context);

/// Trains the clean model and scores it on the clean test set.
Baseline compute_baseline(const EvaluationContext& context);

/// Perturbed model and test inputs for one strategy, before scoring.
struct PerturbedRun {
  PerturbedBundle bundle;
  Parameters model;
  Matrix test_inputs;
};

/// Pre-training factors, training, then post-hoc factors. Throws
/// DivergenceError when training breaks down.
PerturbedRun run_perturbed(const PerturbationStrategy& ps, const EvaluationContext& context);

/// The full perturb / train / modify / score pipeline for one strategy.
/// Training divergence yields a failed record with pv = 0.
EvaluationRecord evaluate_strategy(const PerturbationStrategy& ps, const EvaluationContext& context,
                                   const Baseline& baseline);

/// Evaluator over the real training pipeline with a shared cache.
class PipelineEvaluator final : public Evaluator {
 public:
  /// A null cache gets a private in-memory one. Parallelism 0 is treated as 1.
  PipelineEvaluator(EvaluationContext context, std::shared_ptr<EvalCache> cache = nullptr,
                    std::size_t parallelism = 1);

  const PerturbationPool& pool() const override { return context_.pool; }
  const EvaluationContext& context() const { return context_; }
  const Baseline& baseline() const { return baseline_; }
  EvalCache& cache() { return *cache_; }

  using Evaluator::evaluate;
  std::vector<EvaluationRecord> evaluate(std::span<const PerturbationStrategy> batch) override;

  /// Count of pipeline runs actually performed (cache misses).
  std::size_t trainings() const { return trainings_; }

 private:
  EvaluationContext context_;
  std::shared_ptr<EvalCache> cache_;
  std::size_t parallelism_;
  Baseline baseline_;
  std::size_t trainings_ = 0;
};

/// Every pool strategy in enumeration order.
std::vector<EvaluationRecord> evaluate_pool(Evaluator& evaluator);

}  // namespace vforge

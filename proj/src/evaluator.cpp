#include "vforge/evaluator.hpp"

#include <atomic>
#include <exception>
#include <chrono>
#include <sstream>
#include <thread>

namespace vforge {

namespace {

void hash_bytes(std::uint64_t& h, const void* data, std::size_t size) {
  h = fnv1a(std::string_view(static_cast<const char*>(data), size), h);
}

void hash_dataset(std::uint64_t& h, const Dataset& d) {
  hash_bytes(h, d.features.data(), sizeof(double) * static_cast<std::size_t>(d.features.size()));
  hash_bytes(h, d.labels.data(), sizeof(int) * d.labels.size());
  for (const auto& r : d.ranges) {
    hash_bytes(h, &r.min, sizeof(double));
    hash_bytes(h, &r.max, sizeof(double));
  }
}

std::string describe(const EvaluationContext& c) {
  std::ostringstream out;
  out.precision(17);
  const auto& m = c.model_config;
  out << "model:" << m.input_dim << ';';
  for (auto w : m.hidden_layers) out << w << ',';
  out << ';' << m.output_dim << ';' << static_cast<int>(m.activation) << ';'
      << static_cast<int>(m.init_scheme) << ';' << m.init_seed << '\n';
  const auto& t = c.train_config;
  out << "train:" << t.epochs << ';' << t.batch_size << ';' << t.learning_rate << ';'
      << t.shuffle_seed << '\n';
  out << "split:" << c.data.split_seed << ';' << c.data.test_fraction << '\n';
  for (const auto& f : c.pool.factors()) {
    out << "factor:" << factor_code(f.kind);
    for (const auto& l : f.levels) {
      out << '|' << l.amount << ';' << l.width_delta << ';' << (l.seed ? std::to_string(*l.seed) : "-");
      if (l.tau) {
        const auto& v = l.tau->values();
        for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << v.data()[i];
      }
    }
    out << '\n';
  }
  out << "master_seed:" << c.master_seed << '\n';
  return out.str();
}

}  // namespace

std::string fingerprint(const EvaluationContext& context) {
  std::uint64_t h = fnv1a(describe(context));
  hash_dataset(h, context.data.train);
  hash_dataset(h, context.data.test);
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

Baseline compute_baseline(const EvaluationContext& context) {
  const auto& train_set = context.data.train;
  const auto& test_set = context.data.test;
  Parameters model = train(train_set.features, train_set.labels, context.model_config,
                           context.train_config);
  const Matrix probs = forward(model, test_set.features);
  return {std::move(model), c_cdd(probs, test_set.labels), accuracy(probs, test_set.labels)};
}

PerturbedRun run_perturbed(const PerturbationStrategy& ps, const EvaluationContext& context) {
  const auto& train_set = context.data.train;
  const auto& test_set = context.data.test;
  PerturbedBundle bundle =
      perturb(context.pool, ps, test_set.features, train_set.labels, context.model_config,
              context.train_config, train_set.num_classes, context.master_seed);
  Parameters trained =
      train(train_set.features, bundle.train_labels, bundle.model_config, bundle.train_config);
  FinishedModel finished =
      finish_perturbation(bundle, std::move(trained), test_set.labels, test_set.ranges);
  return {std::move(bundle), std::move(finished.model), std::move(finished.test_inputs)};
}

EvaluationRecord evaluate_strategy(const PerturbationStrategy& ps, const EvaluationContext& context,
                                   const Baseline& baseline) {
  const auto start = std::chrono::steady_clock::now();
  const auto& test_set = context.data.test;

  EvaluationRecord r;
  r.strategy = ps;
  r.baseline_ccdd = baseline.ccdd;
  r.baseline_accuracy = baseline.accuracy;
  r.master_seed = context.master_seed;

  try {
    const PerturbedRun run = run_perturbed(ps, context);
    const Matrix probs = forward(run.model, run.test_inputs);
    if (!probs.allFinite()) throw DivergenceError(0, "perturbed model produced non-finite outputs");
    // Desired classes are always the clean test labels.
    r.perturbed_ccdd = c_cdd(probs, test_set.labels);
    r.perturbed_accuracy = accuracy(probs, test_set.labels);
    r.pv = std::abs(r.perturbed_ccdd.value - r.baseline_ccdd.value);
  } catch (const DivergenceError& e) {
    r.failed = true;
    r.failure = e.what();
    r.perturbed_ccdd = {0.0, static_cast<std::size_t>(test_set.size())};
    r.perturbed_accuracy = 0.0;
    r.pv = 0.0;
  }
  r.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

PipelineEvaluator::PipelineEvaluator(EvaluationContext context, std::shared_ptr<EvalCache> cache,
                                     std::size_t parallelism)
    : context_(std::move(context)),
      cache_(std::move(cache)),
      parallelism_(std::max<std::size_t>(parallelism, 1)) {
  context_.model_config.validate();
  context_.train_config.validate();
  context_.pool.validate_against(context_.model_config);
  if (!cache_) cache_ = std::make_shared<EvalCache>(fingerprint(context_));
  if (cache_->fingerprint() != fingerprint(context_)) {
    throw ConfigError("evaluation cache belongs to a different experiment");
  }
  baseline_ = compute_baseline(context_);
}

std::vector<EvaluationRecord> PipelineEvaluator::evaluate(
    std::span<const PerturbationStrategy> batch) {
  std::vector<std::optional<EvaluationRecord>> out(batch.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!context_.pool.contains(batch[i])) {
      throw ConfigError("strategy '" + batch[i].encoding() + "' is not in the pool");
    }
    out[i] = cache_->find(batch[i].encoding());
    if (out[i]) continue;
    // The same strategy twice in one batch is computed once.
    bool duplicate = false;
    for (std::size_t p : pending) duplicate = duplicate || batch[p] == batch[i];
    if (!duplicate) pending.push_back(i);
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(pending.size());
  auto work = [&] {
    for (std::size_t k = next++; k < pending.size(); k = next++) {
      const std::size_t i = pending[k];
      try {
        out[i] = evaluate_strategy(batch[i], context_, baseline_);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(parallelism_, pending.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t i : pending) cache_->insert(*out[i]);
  trainings_ += pending.size();

  std::vector<EvaluationRecord> records;
  records.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!out[i]) out[i] = cache_->find(batch[i].encoding());
    records.push_back(std::move(*out[i]));
  }
  return records;
}

std::vector<EvaluationRecord> evaluate_pool(Evaluator& evaluator) {
  const auto all = evaluator.pool().all();
  return evaluator.evaluate(all);
}

}  // namespace vforge

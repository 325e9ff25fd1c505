#include "support.hpp"
#include "vforge/search.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <set>

using namespace vforge;

namespace {

Factor levels(FactorKind kind, std::size_t n) {
  Factor f{kind, {}};
  for (std::size_t i = 0; i < n; ++i) {
    f.levels.push_back(FactorLevel::scalar(kind, 0.1 * static_cast<double>(i)));
  }
  return f;
}

PerturbationPool cube_pool() {
  return PerturbationPool({levels(FactorKind::adversarial_attack, 3),
                           levels(FactorKind::label_flipping, 3),
                           levels(FactorKind::weight_modification, 3)});
}

/// Scores strategies with a fixed function of their level vector.
class TableEvaluator final : public Evaluator {
 public:
  TableEvaluator(PerturbationPool pool, std::function<double(const PerturbationStrategy&)> pv)
      : pool_(std::move(pool)), pv_(std::move(pv)) {}

  const PerturbationPool& pool() const override { return pool_; }

  using Evaluator::evaluate;
  std::vector<EvaluationRecord> evaluate(std::span<const PerturbationStrategy> batch) override {
    std::vector<EvaluationRecord> out;
    for (const auto& ps : batch) {
      EvaluationRecord r;
      r.strategy = ps;
      r.pv = pv_(ps);
      r.perturbed_ccdd = {-r.pv, 10};
      r.baseline_ccdd = {0.0, 10};
      out.push_back(r);
      ++calls;
    }
    return out;
  }

  std::size_t calls = 0;

 private:
  PerturbationPool pool_;
  std::function<double(const PerturbationStrategy&)> pv_;
};

/// Smooth bowl with its peak at levels (2, 1, 2).
double bowl(const PerturbationStrategy& ps) {
  const double a = static_cast<double>(ps.levels[0]) - 2.0;
  const double b = static_cast<double>(ps.levels[1]) - 1.0;
  const double c = static_cast<double>(ps.levels[2]) - 2.0;
  return 0.5 - 0.05 * (a * a + b * b + c * c);
}

void expect_trace_invariants(const SearchResult& r, std::size_t budget) {
  const auto& e = r.trace.entries;
  ASSERT_FALSE(e.empty());
  EXPECT_LE(e.size(), budget);
  ASSERT_EQ(r.records.size(), e.size());
  std::set<PerturbationStrategy> seen;
  double best = e.front().pv;
  for (std::size_t i = 0; i < e.size(); ++i) {
    EXPECT_EQ(e[i].step, i);
    EXPECT_TRUE(seen.insert(e[i].strategy).second) << "repeated " << e[i].strategy.encoding();
    best = std::max(best, e[i].pv);
    EXPECT_EQ(e[i].incumbent_pv, best);
    EXPECT_EQ(r.records[i].strategy, e[i].strategy);
  }
  EXPECT_EQ(r.best.pv, best);
}

}  // namespace

TEST(Embedding, ThreeLevelMapping) {
  auto pool = cube_pool();
  EXPECT_EQ(encode_real(pool, PerturbationStrategy{{0, 1, 2}}), (std::vector<double>{0, 0.5, 1}));
  std::vector<double> v{0.74, 0.76, 0.25};
  EXPECT_EQ(decode_real(pool, v).levels, (std::vector<std::size_t>{1, 2, 1}));
  std::vector<double> out_of_range{-3.0, 7.0, std::nan("")};
  EXPECT_EQ(decode_real(pool, out_of_range).levels, (std::vector<std::size_t>{0, 2, 0}));
}

TEST(Embedding, RoundTripOverPool) {
  auto pool = cube_pool();
  for (const auto& ps : pool.all()) {
    auto v = encode_real(pool, ps);
    EXPECT_EQ(decode_real(pool, v), ps);
  }
  PerturbationPool single({levels(FactorKind::label_noise, 1), levels(FactorKind::bias_modification, 4)});
  EXPECT_EQ(encode_real(single, PerturbationStrategy{{0, 3}}), (std::vector<double>{0, 1}));
}

TEST(BruteForce, RanksEverything) {
  TableEvaluator ev(cube_pool(), bowl);
  auto r = brute_force(ev, SearchBudget{27, 1});
  ASSERT_EQ(r.ranked.size(), 27u);
  EXPECT_EQ(r.ranked.front().encoding(), "2.1.2");
  for (std::size_t i = 1; i < r.ranked.size(); ++i) {
    EXPECT_GE(r.ranked[i - 1].pv, r.ranked[i].pv);
    if (r.ranked[i - 1].pv == r.ranked[i].pv) {
      EXPECT_LT(r.ranked[i - 1].encoding(), r.ranked[i].encoding());
    }
  }
  EXPECT_THROW(brute_force(ev, SearchBudget{26, 1}), ConfigError);
}

TEST(BruteForce, SingleStrategyPool) {
  TableEvaluator ev(PerturbationPool({levels(FactorKind::label_noise, 1)}),
                    [](const PerturbationStrategy&) { return 0.0; });
  auto r = brute_force(ev, SearchBudget{});
  ASSERT_EQ(r.ranked.size(), 1u);
  EXPECT_EQ(r.ranked[0].encoding(), "0");
}

TEST(Session, RepeatsAreFreeAndBudgetHolds) {
  TableEvaluator ev(cube_pool(), bowl);
  SearchSession s(ev, SearchBudget{3, 1}, "t");
  auto p = cube_pool().all();
  s.evaluate(p[0]);
  s.evaluate(p[0]);
  EXPECT_EQ(s.remaining(), 2u);
  std::vector<PerturbationStrategy> batch{p[1], p[2], p[3]};
  auto out = s.evaluate(batch);
  EXPECT_TRUE(out[0] && out[1]);
  EXPECT_FALSE(out[2]);
  EXPECT_TRUE(s.exhausted());
  EXPECT_EQ(ev.calls, 3u);
  EXPECT_THROW(s.evaluate(PerturbationStrategy{{9, 9, 9}}), ConfigError);
}

TEST(Ea, ZeroDifferenceMutantIsFirstPartner) {
  auto pool = cube_pool();
  for (const auto& r1 : pool.all()) {
    for (double eps : {0.1, 0.8, 1.0}) {
      EXPECT_EQ(de_mutant(pool, r1, pool.decode("1.2.0"), pool.decode("1.2.0"), eps), r1);
    }
  }
}

TEST(Ea, MutantArithmetic) {
  auto pool = cube_pool();
  // 0.5 + 0.8 * (1 - 0) = 1.3 -> 1; 0 + 0.8 * (0 - 0.5) -> 0; 0.5 + 0.8 * (0.5 - 1) = 0.1 -> 0
  EXPECT_EQ(de_mutant(pool, pool.decode("1.0.1"), pool.decode("2.0.1"), pool.decode("0.1.2"), 0.8)
                .encoding(),
            "2.0.0");
}

TEST(Ea, CrossoverKeepsParentBelowRate) {
  PerturbationStrategy parent{{0, 0, 0}};
  PerturbationStrategy mutant{{2, 2, 2}};
  std::vector<double> draws{0.1, 0.5, 0.95};
  EXPECT_EQ(de_crossover(parent, mutant, draws, 0.5).levels, (std::vector<std::size_t>{0, 2, 2}));
  EXPECT_EQ(de_crossover(parent, mutant, draws, 1.0), parent);
  EXPECT_EQ(de_crossover(parent, mutant, draws, 0.0), mutant);
}

TEST(Ea, FullReplacementRateIsStationary) {
  TableEvaluator ev(cube_pool(), bowl);
  EaConfig cfg;
  cfg.replacement_rate = 1.0;
  cfg.seed = 4;
  auto r = search_ea(ev, cfg, SearchBudget{60, 100});
  EXPECT_EQ(r.trace.evaluations(), cfg.population_size);
  expect_trace_invariants(r, 60);
}

TEST(Ea, FindsBowlPeak) {
  TableEvaluator ev(cube_pool(), bowl);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EaConfig cfg;
    cfg.seed = seed;
    auto r = search_ea(ev, cfg, SearchBudget{60, 100});
    expect_trace_invariants(r, 60);
    hits += r.best.encoding() == "2.1.2";
  }
  EXPECT_GE(hits, 18);
}

TEST(Ea, ConfigValidation) {
  TableEvaluator ev(cube_pool(), bowl);
  EaConfig cfg;
  cfg.population_size = 3;
  EXPECT_THROW(search_ea(ev, cfg, SearchBudget{}), ConfigError);
  cfg = EaConfig{};
  cfg.epsilon = 0.0;
  EXPECT_THROW(search_ea(ev, cfg, SearchBudget{}), ConfigError);
}

TEST(Ea, SameSeedSameTrace) {
  TableEvaluator ev(cube_pool(), bowl);
  EaConfig cfg;
  cfg.seed = 12;
  auto a = search_ea(ev, cfg, SearchBudget{});
  auto b = search_ea(ev, cfg, SearchBudget{});
  ASSERT_EQ(a.trace.evaluations(), b.trace.evaluations());
  for (std::size_t i = 0; i < a.trace.evaluations(); ++i) {
    EXPECT_EQ(a.trace.entries[i].strategy, b.trace.entries[i].strategy);
  }
}

TEST(Rl, ZeroDiscountTargetsImmediateReward) {
  QLearner q(3, 0.5, 0.0);
  QLearner::State s{{0}, 9};
  QLearner::State next{{1}, 5};
  q.update(next, 2, 10.0, s);  // a large value downstream must not leak in
  EXPECT_DOUBLE_EQ(q.update(s, 1, 0.4, next), 0.2);
  EXPECT_DOUBLE_EQ(q.update(s, 1, 0.4, next), 0.3);
  EXPECT_EQ(q.greedy(s), 1u);
  EXPECT_EQ(q.greedy(QLearner::State{{2}, 0}), 0u);
}

TEST(Rl, UpdateArithmetic) {
  QLearner q(2, 0.25, 0.9);
  QLearner::State a{{0}, 0};
  QLearner::State b{{1}, 0};
  q.update(b, 0, 2.0, a);  // Q(b,0) = 0.5
  EXPECT_DOUBLE_EQ(q.update(a, 1, 1.0, b), 0.25 * (1.0 + 0.9 * 0.5));
}

TEST(Rl, BinsAndActions) {
  EXPECT_EQ(ccdd_bin(0.0, 10), 9u);
  EXPECT_EQ(ccdd_bin(-1.0, 10), 0u);
  EXPECT_EQ(ccdd_bin(-0.55, 10), 4u);
  EXPECT_EQ(ccdd_bin(-7.0, 10), 0u);
  auto pool = cube_pool();
  EXPECT_EQ(action_count(pool), 9u);
  EXPECT_EQ(apply_action(pool, pool.all_off(), 4).encoding(), "0.1.0");
  EXPECT_EQ(apply_action(pool, pool.decode("2.2.2"), 6).encoding(), "2.2.0");
  EXPECT_THROW(apply_action(pool, pool.all_off(), 9), ConfigError);
}

TEST(Rl, TwoStateValueIterationOracle) {
  PerturbationPool pool({levels(FactorKind::label_noise, 2)});
  auto pv = [](const PerturbationStrategy& ps) { return ps.levels[0] == 1 ? 0.5 : 0.0; };
  TableEvaluator ev(pool, pv);

  RlConfig cfg;
  cfg.episodes = 100;
  cfg.steps_per_episode = 6;
  cfg.exploration = 0.5;
  cfg.seed = 3;
  QLearner agent(1, 0.5, 0.9);
  auto result = search_rl(ev, cfg, SearchBudget{60, 100}, &agent);
  EXPECT_EQ(result.best.encoding(), "1");

  // Value iteration on the two-state chain; action a moves to level a.
  const double g = cfg.discount;
  double v[2] = {0.0, 0.0};
  double qstar[2][2] = {};
  for (int it = 0; it < 2000; ++it) {
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 2; ++a) qstar[s][a] = pv(PerturbationStrategy{{std::size_t(a)}}) -
                                                pv(PerturbationStrategy{{std::size_t(s)}}) +
                                                g * v[a];
    }
    for (int s = 0; s < 2; ++s) v[s] = std::max(qstar[s][0], qstar[s][1]);
  }
  const QLearner::State s0{{0}, ccdd_bin(0.0, cfg.ccdd_bins)};
  const QLearner::State s1{{1}, ccdd_bin(-0.5, cfg.ccdd_bins)};
  EXPECT_EQ(agent.greedy(s0), 1u);
  EXPECT_EQ(agent.greedy(s1), 1u);
  for (int a = 0; a < 2; ++a) {
    EXPECT_NEAR(agent.values(s0)[static_cast<std::size_t>(a)], qstar[0][a], 0.02);
    EXPECT_NEAR(agent.values(s1)[static_cast<std::size_t>(a)], qstar[1][a], 0.02);
  }
}

TEST(Rl, TraceInvariants) {
  TableEvaluator ev(cube_pool(), bowl);
  RlConfig cfg;
  cfg.seed = 5;
  auto r = search_rl(ev, cfg, SearchBudget{20, 100});
  expect_trace_invariants(r, 20);
  EXPECT_EQ(r.trace.entries.front().strategy, ev.pool().all_off());
}

TEST(Smbo, ExpectedImprovementVanishesAtObservedPoints) {
  GaussianProcess gp(0.5, 0.0);
  std::vector<std::vector<double>> pts{{0.0, 0.0}, {0.5, 1.0}, {1.0, 0.5}};
  std::vector<double> ys{0.1, 0.4, 0.2};
  gp.fit(pts, ys);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto p = gp.predict(pts[i]);
    EXPECT_NEAR(p.mean, ys[i], 1e-6);
    EXPECT_LT(p.stddev, 1e-4);
    EXPECT_LT(expected_improvement(p, 0.4, 0.0), 1e-6);
  }
  std::vector<double> far{1.0, 1.0};
  EXPECT_GT(gp.predict(far).stddev, 0.01);
}

TEST(Smbo, ExpectedImprovementClosedForm) {
  GaussianProcess::Prediction p{1.0, 2.0};
  // z = 0.5: (mu - f) Phi(z) + sigma phi(z)
  const double z = 0.5;
  const double expected = 1.0 * 0.5 * std::erfc(-z / std::sqrt(2.0)) +
                          2.0 * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  EXPECT_NEAR(expected_improvement(p, 0.0, 0.0), expected, 1e-12);
  EXPECT_EQ(expected_improvement({0.3, 0.0}, 0.5, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(expected_improvement({0.7, 0.0}, 0.5, 0.0), 0.2);
}

TEST(Smbo, SeedingExhaustsSmallPool) {
  PerturbationPool small({levels(FactorKind::label_noise, 2), levels(FactorKind::bias_modification, 2)});
  TableEvaluator ev(small, [](const PerturbationStrategy& ps) {
    return 0.1 * static_cast<double>(ps.levels[0] + 2 * ps.levels[1]);
  });
  SmboConfig cfg;
  cfg.initial_samples = 5;
  auto r = search_smbo(ev, cfg, SearchBudget{});
  EXPECT_EQ(r.trace.evaluations(), 4u);
  EXPECT_EQ(r.best.encoding(), brute_force(ev, SearchBudget{}).ranked.front().encoding());
}

TEST(Smbo, NeverRepeatsAndFindsBowlPeak) {
  TableEvaluator ev(cube_pool(), bowl);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SmboConfig cfg;
    cfg.seed = seed;
    auto r = search_smbo(ev, cfg, SearchBudget{60, 100});
    expect_trace_invariants(r, 60);
    EXPECT_LE(r.trace.evaluations(), cfg.initial_samples + cfg.iterations);
    hits += r.best.encoding() == "2.1.2";
  }
  EXPECT_GE(hits, 18);
}

TEST(Sway, BaseCaseIsBruteForce) {
  PerturbationPool small({levels(FactorKind::label_noise, 2), levels(FactorKind::bias_modification, 2)});
  TableEvaluator ev(small, [](const PerturbationStrategy& ps) {
    return ps.levels == std::vector<std::size_t>{1, 0} ? 1.0 : 0.0;
  });
  SwayConfig cfg;
  cfg.size_threshold = 4;
  auto r = search_sway(ev, cfg, SearchBudget{});
  EXPECT_EQ(r.trace.evaluations(), 4u);
  EXPECT_EQ(r.best.encoding(), "1.0");
}

TEST(Sway, BudgetAndQualityOnBowl) {
  TableEvaluator ev(cube_pool(), bowl);
  const double bound = 2.0 * std::log2(27.0 / 4.0) + 4.0 + 2.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SwayConfig cfg;
    cfg.seed = seed;
    auto r = search_sway(ev, cfg, SearchBudget{60, 100});
    expect_trace_invariants(r, 60);
    EXPECT_LE(static_cast<double>(r.trace.evaluations()), bound);
    EXPECT_GE(r.best.pv, 0.5 - 0.05 * 2);
  }
}

TEST(Sway, DuplicateGeometryIsDeterministic) {
  PerturbationPool pool({levels(FactorKind::label_noise, 1), levels(FactorKind::bias_modification, 1)});
  TableEvaluator ev(pool, [](const PerturbationStrategy&) { return 0.0; });
  SwayConfig cfg;
  cfg.size_threshold = 2;
  auto r = search_sway(ev, cfg, SearchBudget{});
  EXPECT_EQ(r.trace.evaluations(), 1u);
}

TEST(Search, EnginesNeverBeatBruteForce) {
  TableEvaluator ev(cube_pool(), [](const PerturbationStrategy& ps) {
    return std::fmod(0.37 * static_cast<double>(ps.levels[0] * 9 + ps.levels[1] * 3 + ps.levels[2]), 1.0);
  });
  const double oracle = brute_force(ev, SearchBudget{}).ranked.front().pv;
  EXPECT_LE(search_ea(ev, EaConfig{}, SearchBudget{}).best.pv, oracle);
  EXPECT_LE(search_rl(ev, RlConfig{}, SearchBudget{}).best.pv, oracle);
  EXPECT_LE(search_smbo(ev, SmboConfig{}, SearchBudget{}).best.pv, oracle);
  EXPECT_LE(search_sway(ev, SwayConfig{}, SearchBudget{}).best.pv, oracle);
}

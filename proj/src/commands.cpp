#include "vforge/commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace vforge {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

struct RunContext {
  EvaluationContext context;
  std::shared_ptr<EvalCache> cache;
  std::unique_ptr<PipelineEvaluator> evaluator;
};

RunContext open_run(const ExperimentConfig& config) {
  std::filesystem::create_directories(config.output_dir);
  RunContext run{make_context(config), nullptr, nullptr};
  run.cache = std::make_shared<EvalCache>(fingerprint(run.context),
                                          config.output_dir / "cache.jsonl");
  run.evaluator = std::make_unique<PipelineEvaluator>(run.context, run.cache,
                                                      effective_parallelism(config));
  return run;
}

json baseline_json(const PipelineEvaluator& ev) {
  const auto& b = ev.baseline();
  return {{"accuracy", b.accuracy}, {"ccdd", b.ccdd.value}, {"sample_count", b.ccdd.sample_count}};
}

json strategy_json(const PerturbationPool& pool, const PerturbationStrategy& ps) {
  json factors = json::object();
  for (std::size_t i = 0; i < pool.num_factors(); ++i) {
    factors[factor_code(pool.factors()[i].kind)] = ps.levels[i];
  }
  return {{"encoding", ps.encoding()}, {"levels", factors}};
}

std::string fixed(double v, int precision = 6) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

/// Strategy with only the given factors switched on.
PerturbationStrategy only(const PerturbationPool& pool,
                          const std::vector<std::pair<std::size_t, std::size_t>>& on) {
  PerturbationStrategy ps = pool.all_off();
  for (auto [factor, level] : on) ps.levels[factor] = level;
  return ps;
}

json marginals(const PerturbationPool& pool, Evaluator& evaluator, std::ostream& out) {
  std::vector<PerturbationStrategy> singles;
  for (std::size_t i = 0; i < pool.num_factors(); ++i) {
    for (std::size_t l = 1; l < pool.level_count(i); ++l) singles.push_back(only(pool, {{i, l}}));
  }
  const auto records = evaluator.evaluate(singles);
  json table = json::array();
  out << "\nsingle-factor marginals\n  factor  level  pv          accuracy\n";
  std::size_t k = 0;
  for (std::size_t i = 0; i < pool.num_factors(); ++i) {
    for (std::size_t l = 1; l < pool.level_count(i); ++l, ++k) {
      const auto& r = records[k];
      const std::string code = factor_code(pool.factors()[i].kind);
      table.push_back({{"factor", code}, {"level", l}, {"encoding", r.encoding()}, {"pv", r.pv},
                       {"perturbed_accuracy", r.perturbed_accuracy}, {"failed", r.failed}});
      out << "  " << std::left << std::setw(6) << code << "  " << std::setw(5) << l << "  "
          << std::setw(10) << fixed(r.pv) << "  " << fixed(r.perturbed_accuracy, 4) << '\n';
    }
  }
  return table;
}

}  // namespace

std::size_t effective_parallelism(const ExperimentConfig& config) {
  if (const char* env = std::getenv("VF_PARALLELISM"); env && *env) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (*end != '\0' || v < 1) throw ConfigError("VF_PARALLELISM must be a positive integer");
    return static_cast<std::size_t>(v);
  }
  return config.parallelism;
}

json cmd_baseline(const ExperimentConfig& config, std::ostream& out) {
  const auto start = Clock::now();
  std::filesystem::create_directories(config.output_dir);
  const EvaluationContext context = make_context(config);
  const Baseline b = compute_baseline(context);
  const auto& train_set = context.data.train;

  json report = {
      {"command", "baseline"},
      {"fingerprint", fingerprint(context)},
      {"baseline",
       {{"accuracy", b.accuracy},
        {"ccdd", b.ccdd.value},
        {"sample_count", b.ccdd.sample_count},
        {"train_accuracy", accuracy(b.model, train_set.features, train_set.labels)},
        {"train_ccdd", c_cdd(b.model, train_set.features, train_set.labels).value}}},
      {"timing", {{"wall_time_s", seconds_since(start)}}},
  };
  write_text(config.output_dir / "summary.json", report.dump(2) + "\n");

  out << "baseline\n"
      << "  test accuracy   " << fixed(b.accuracy, 4) << '\n'
      << "  test C-CDD      " << fixed(b.ccdd.value) << '\n'
      << "  train accuracy  " << fixed(report["baseline"]["train_accuracy"].get<double>(), 4) << '\n'
      << "  train C-CDD     " << fixed(report["baseline"]["train_ccdd"].get<double>()) << '\n';
  return report;
}

json cmd_grid(const ExperimentConfig& config, const std::vector<FactorKind>& kinds,
              std::ostream& out) {
  const auto start = Clock::now();
  if (kinds.empty()) throw ConfigError("grid: at least one factor required");
  if (kinds.size() > 4) throw ConfigError("grid: at most 4 factors (16 combinations)");

  RunContext run = open_run(config);
  const PerturbationPool& pool = run.context.pool;

  std::vector<std::pair<std::size_t, std::size_t>> chosen;  // (factor index, on level)
  for (FactorKind k : kinds) {
    auto idx = pool.index_of(k);
    if (!idx) throw ConfigError("grid: factor " + factor_code(k) + " is not in the pool");
    for (const auto& c : chosen) {
      if (c.first == *idx) throw ConfigError("grid: factor " + factor_code(k) + " listed twice");
    }
    if (pool.level_count(*idx) < 2) throw ConfigError("grid: factor " + factor_code(k) + " has no on level");
    auto it = config.grid_levels.find(factor_code(k));
    chosen.emplace_back(*idx, it != config.grid_levels.end() ? it->second : pool.level_count(*idx) - 1);
  }

  const std::size_t combos = std::size_t{1} << chosen.size();
  std::vector<PerturbationStrategy> strategies;
  for (std::size_t mask = 0; mask < combos; ++mask) {
    std::vector<std::pair<std::size_t, std::size_t>> on;
    for (std::size_t b = 0; b < chosen.size(); ++b) {
      if (mask & (std::size_t{1} << b)) on.push_back(chosen[b]);
    }
    strategies.push_back(only(pool, on));
  }
  const auto records = run.evaluator->evaluate(strategies);

  auto label = [&](std::size_t mask) {
    std::string s;
    for (std::size_t b = 0; b < chosen.size(); ++b) {
      if (mask & (std::size_t{1} << b)) s += (s.empty() ? "" : "+") + factor_code(kinds[b]);
    }
    return s.empty() ? std::string("none") : s;
  };

  json rows = json::array();
  out << "grid over " << chosen.size() << " factors (" << combos << " runs)\n"
      << "  combination     accuracy  C-CDD       pv\n";
  for (std::size_t mask = 0; mask < combos; ++mask) {
    const auto& r = records[mask];
    json row = {{"factors", label(mask)},
                {"mask", mask},
                {"strategy", strategy_json(pool, r.strategy)},
                {"perturbed_accuracy", r.perturbed_accuracy},
                {"perturbed_ccdd", r.perturbed_ccdd.value},
                {"pv", r.pv},
                {"failed", r.failed}};
    rows.push_back(row);
    out << "  " << std::left << std::setw(14) << label(mask) << "  " << std::setw(8)
        << fixed(r.perturbed_accuracy, 4) << "  " << std::setw(10) << fixed(r.perturbed_ccdd.value)
        << "  " << fixed(r.pv) << (r.failed ? "  (failed)" : "") << '\n';
  }

  // Combined pv against the sum of its single-factor pvs.
  json interactions = json::array();
  out << "\nnon-additivity (combined pv - sum of single pvs)\n";
  for (std::size_t mask = 0; mask < combos; ++mask) {
    if (std::popcount(mask) < 2) continue;
    double sum = 0.0;
    for (std::size_t b = 0; b < chosen.size(); ++b) {
      if (mask & (std::size_t{1} << b)) sum += records[std::size_t{1} << b].pv;
    }
    const double combined = records[mask].pv;
    interactions.push_back({{"factors", label(mask)},
                            {"combined_pv", combined},
                            {"sum_single_pv", sum},
                            {"non_additivity", combined - sum}});
    out << "  " << std::left << std::setw(14) << label(mask) << "  " << fixed(combined - sum) << '\n';
  }

  json report = {
      {"command", "grid"},
      {"fingerprint", run.cache->fingerprint()},
      {"pool", pool_to_json(pool)},
      {"baseline", baseline_json(*run.evaluator)},
      {"rows", rows},
      {"non_additivity", interactions},
      {"timing", {{"wall_time_s", seconds_since(start)}, {"trainings", run.evaluator->trainings()}}},
  };
  write_text(config.output_dir / "summary.json", report.dump(2) + "\n");
  return report;
}

json cmd_search(const ExperimentConfig& config, std::ostream& out) {
  const auto start = Clock::now();
  RunContext run = open_run(config);
  const PerturbationPool& pool = run.context.pool;
  Evaluator& ev = *run.evaluator;
  const std::string& engine = config.engine.name;

  SearchResult result;
  if (engine == "brute") {
    auto bf = brute_force(ev, config.budget);
    result.best = bf.ranked.front();
    result.trace = std::move(bf.trace);
  } else if (engine == "ea") {
    result = search_ea(ev, config.engine.ea, config.budget);
  } else if (engine == "rl") {
    result = search_rl(ev, config.engine.rl, config.budget);
  } else if (engine == "smbo") {
    result = search_smbo(ev, config.engine.smbo, config.budget);
  } else if (engine == "sway") {
    result = search_sway(ev, config.engine.sway, config.budget);
  } else {
    throw ConfigError("unknown engine '" + engine + "'");
  }
  const double search_time = seconds_since(start);

  std::string jsonl;
  std::string csv = "step,encoding,pv,incumbent_pv\n";
  for (const auto& e : result.trace.entries) {
    json line = {{"step", e.step},
                 {"encoding", e.strategy.encoding()},
                 {"levels", e.strategy.levels},
                 {"pv", e.pv},
                 {"incumbent_pv", e.incumbent_pv},
                 {"failed", e.failed}};
    jsonl += line.dump() + "\n";
    std::ostringstream row;
    row << std::setprecision(17) << e.step << ',' << e.strategy.encoding() << ',' << e.pv << ','
        << e.incumbent_pv << '\n';
    csv += row.str();
  }
  write_text(config.output_dir / "trace.jsonl", jsonl);
  write_text(config.output_dir / "trace.csv", csv);

  out << "search engine=" << engine << " evaluations=" << result.trace.evaluations() << '\n'
      << "  baseline accuracy " << fixed(run.evaluator->baseline().accuracy, 4) << "  C-CDD "
      << fixed(run.evaluator->baseline().ccdd.value) << '\n'
      << "  best " << result.best.encoding() << "  pv " << fixed(result.best.pv)
      << "  accuracy " << fixed(result.best.perturbed_accuracy, 4) << '\n';
  json table = marginals(pool, ev, out);

  json report = {
      {"command", "search"},
      {"engine", engine},
      {"fingerprint", run.cache->fingerprint()},
      {"master_seed", config.master_seed},
      {"pool", pool_to_json(pool)},
      {"baseline", baseline_json(*run.evaluator)},
      {"best", {{"strategy", strategy_json(pool, result.best.strategy)},
                {"record", to_json(result.best, false)}}},
      {"evaluations", result.trace.evaluations()},
      {"trace", "trace.jsonl"},
      {"marginals", table},
      {"timing",
       {{"search_wall_time_s", search_time},
        {"wall_time_s", seconds_since(start)},
        {"trainings", run.evaluator->trainings()}}},
  };
  write_text(config.output_dir / "summary.json", report.dump(2) + "\n");
  return report;
}

json verdict_to_json(const RobustnessVerdict& v) {
  double max_input = 0.0;
  json samples = json::array();
  for (std::size_t i = 0; i < v.samples.size(); ++i) {
    const auto& s = v.samples[i];
    max_input = std::max(max_input, s.input_distance);
    json row = {{"index", i},
                {"input_distance", s.input_distance},
                {"input_premise", s.input_premise},
                {"input_robust", s.input_robust},
                {"config_agrees", s.config_conclusion}};
    if (s.output_distance) {
      row["output_distance"] = *s.output_distance;
      row["output_premise"] = s.output_premise;
      row["output_robust"] = s.output_robust;
    }
    samples.push_back(row);
  }
  const auto finite_or_null = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  return {
      {"input", {{"robust", v.input_robust}, {"violations", v.input_violations},
                 {"max_distance", max_input}}},
      {"output", {{"robust", v.output_robust}, {"violations", v.output_violations}}},
      {"config", {{"robust", v.config_robust}, {"distance", finite_or_null(v.config_distance)},
                  {"premise", v.config_premise}, {"disagreements", v.config_disagreements}}},
      {"samples", samples},
  };
}

json cmd_check(const ExperimentConfig& config, const CheckOptions& options, std::ostream& out) {
  std::filesystem::create_directories(config.output_dir);
  const EvaluationContext context = make_context(config);
  const PerturbationStrategy ps = context.pool.decode(options.strategy);
  const Baseline base = compute_baseline(context);
  const PerturbedRun run = run_perturbed(ps, context);

  double sigma = 0.0;
  if (options.sigma) {
    sigma = *options.sigma;
  } else if (auto f1 = context.pool.index_of(FactorKind::adversarial_attack)) {
    sigma = context.pool.level(*f1, ps.levels[*f1]).amount;
  }

  RobustnessProbe probe;
  probe.base = &base.model;
  probe.perturbed = &run.model;
  probe.inputs = &context.data.test.features;
  probe.perturbed_inputs = &run.test_inputs;
  probe.desired = &context.data.test.labels;
  probe.sigma = sigma;
  probe.delta = options.delta;
  probe.eta = options.eta;
  probe.p_norm = options.p;
  const RobustnessVerdict verdict = check_robustness_conditions(probe);

  json report = verdict_to_json(verdict);
  report["command"] = "check";
  report["strategy"] = strategy_json(context.pool, ps);
  report["sigma"] = sigma;
  report["eta"] = options.eta;
  report["p"] = std::isinf(options.p) ? json("inf") : json(options.p);
  if (options.delta) report["delta"] = *options.delta;
  report["sigma_bound_satisfied"] = report["input"]["max_distance"].get<double>() <= sigma;
  write_text(config.output_dir / "check.json", report.dump(2) + "\n");
  out << report.dump(2) << '\n';
  return report;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stress-test a small classifier with combinatorial perturbation strategies"};
  app.name("variance-forge");
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> engine;
  std::optional<std::size_t> budget;
  std::optional<std::string> out_dir;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Experiment JSON file")->required();
    sub->add_option("--seed", seed, "Override master_seed");
    sub->add_option("--engine", engine, "Override engine.name (brute, ea, rl, smbo, sway)");
    sub->add_option("--budget", budget, "Override budget.max_evaluations");
    sub->add_option("--out", out_dir, "Override output_dir");
  };

  auto* baseline = app.add_subcommand("baseline", "Train and score the clean model");
  add_common(baseline);
  auto* grid = app.add_subcommand("grid", "On/off factorial over up to four factors");
  add_common(grid);
  std::string grid_factors;
  grid->add_option("--factors", grid_factors, "Comma-separated factor codes, e.g. F1,F3,F5");
  auto* search = app.add_subcommand("search", "Run a search engine over the pool");
  add_common(search);
  auto* check = app.add_subcommand("check", "Robustness-condition diagnostics for one strategy");
  add_common(check);
  CheckOptions check_opts;
  std::string p_text = "inf";
  check->add_option("--strategy", check_opts.strategy, "Dotted level indices, e.g. 2.0.1")->required();
  check->add_option("--sigma", check_opts.sigma, "Input distance bound");
  check->add_option("--delta", check_opts.delta, "Output distance bound");
  check->add_option("--eta", check_opts.eta, "Configuration distance bound");
  check->add_option("--p", p_text, "Norm order (number >= 1 or inf)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    ExperimentConfig config = load_experiment(config_path);
    if (seed) config.master_seed = *seed;
    if (engine) config.engine.name = *engine;
    if (budget) {
      config.budget.max_evaluations = *budget;
      config.budget.validate();
    }
    if (out_dir) config.output_dir = *out_dir;

    if (*baseline) {
      cmd_baseline(config, out);
    } else if (*grid) {
      std::vector<FactorKind> kinds;
      if (grid_factors.empty()) {
        for (const auto& f : config.pool.factors()) kinds.push_back(f.kind);
      } else {
        std::stringstream ss(grid_factors);
        std::string item;
        while (std::getline(ss, item, ',')) kinds.push_back(parse_factor(item));
      }
      cmd_grid(config, kinds, out);
    } else if (*search) {
      cmd_search(config, out);
    } else if (*check) {
      if (p_text == "inf") {
        check_opts.p = std::numeric_limits<double>::infinity();
      } else {
        try {
          check_opts.p = std::stod(p_text);
        } catch (const std::exception&) {
          throw ConfigError("--p: expected a number >= 1 or inf");
        }
        if (!(check_opts.p >= 1.0)) throw ConfigError("--p: expected a number >= 1 or inf");
      }
      cmd_check(config, check_opts, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return exit_data;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime;
  }
  return exit_ok;
}

}  // namespace vforge

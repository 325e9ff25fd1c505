#include "vforge/experiment.hpp"

#include <fstream>
#include <set>

namespace vforge {

using nlohmann::json;

namespace {

/// Reads fields of one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  ObjectReader(const ObjectReader&) = delete;

  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() == 0) finish();
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& at(const std::string& key) {
    known_.insert(key);
    if (!j_.contains(key)) throw ConfigError(path_ + "." + key + ": required key missing");
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) {
    const json& v = at(key);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    return has(key) ? get<T>(key) : fallback;
  }

  std::string child(const std::string& key) const { return path_ + "." + key; }

  void finish() {
    for (const auto& [key, value] : j_.items()) {
      if (!known_.contains(key)) throw ConfigError(path_ + "." + key + ": unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("config.model.activation: expected relu or tanh, got '" + s + "'");
}

InitScheme parse_init(const std::string& s) {
  if (s == "kaiming") return InitScheme::kaiming;
  if (s == "xavier") return InitScheme::xavier;
  throw ConfigError("config.model.init_scheme: expected kaiming or xavier, got '" + s + "'");
}

FactorLevel parse_level(FactorKind kind, const json& v, const std::string& where) {
  try {
    switch (kind) {
      case FactorKind::label_flipping:
        if (v.is_array()) {
          const auto rows = v.get<std::vector<std::vector<double>>>();
          Eigen::MatrixXd t(static_cast<Eigen::Index>(rows.size()),
                            static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
          for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != rows[0].size()) throw ConfigError(where + ": ragged tau matrix");
            for (std::size_t c = 0; c < rows[r].size(); ++c) {
              t(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
            }
          }
          return FactorLevel::flip(TauMatrix(std::move(t)));
        }
        return FactorLevel::scalar(kind, v.get<double>());
      case FactorKind::fc_layer_modification:
        return FactorLevel::width(v.get<std::int64_t>());
      case FactorKind::seed_override:
        if (v.is_null()) return FactorLevel::reseed(std::nullopt);
        return FactorLevel::reseed(v.get<std::uint64_t>());
      default:
        return FactorLevel::scalar(kind, v.get<double>());
    }
  } catch (const json::exception&) {
    throw ConfigError(where + ": wrong level type for " + factor_code(kind));
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

json level_to_json(const FactorLevel& l) {
  switch (l.kind) {
    case FactorKind::label_flipping:
      if (l.tau) {
        json rows = json::array();
        const auto& t = l.tau->values();
        for (Eigen::Index r = 0; r < t.rows(); ++r) {
          std::vector<double> row(static_cast<std::size_t>(t.cols()));
          for (Eigen::Index c = 0; c < t.cols(); ++c) row[static_cast<std::size_t>(c)] = t(r, c);
          rows.push_back(row);
        }
        return rows;
      }
      return l.amount;
    case FactorKind::fc_layer_modification:
      return l.width_delta;
    case FactorKind::seed_override:
      return l.seed ? json(*l.seed) : json(nullptr);
    default:
      return l.amount;
  }
}

}  // namespace

PerturbationPool parse_pool(const json& j) {
  if (!j.is_array()) throw ConfigError("pool: expected an array of factors");
  std::vector<Factor> factors;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = "pool[" + std::to_string(i) + "]";
    ObjectReader r(j[i], where);
    Factor f;
    f.kind = parse_factor(r.get<std::string>("factor"));
    const json& levels = r.at("levels");
    if (!levels.is_array() || levels.empty()) throw ConfigError(where + ".levels: non-empty array required");
    for (std::size_t k = 0; k < levels.size(); ++k) {
      f.levels.push_back(parse_level(f.kind, levels[k], where + ".levels[" + std::to_string(k) + "]"));
    }
    factors.push_back(std::move(f));
  }
  return PerturbationPool(std::move(factors));
}

json pool_to_json(const PerturbationPool& pool) {
  json out = json::array();
  for (const auto& f : pool.factors()) {
    json levels = json::array();
    for (const auto& l : f.levels) levels.push_back(level_to_json(l));
    out.push_back({{"factor", factor_code(f.kind)}, {"levels", levels}});
  }
  return out;
}

ExperimentConfig parse_experiment(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  ObjectReader root(j, "config");

  {
    ObjectReader d(root.at("dataset"), "config.dataset");
    if (d.has("csv")) {
      std::filesystem::path p = d.get<std::string>("csv");
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      c.dataset = CsvSource{p, d.get<std::string>("label_column", "label")};
    } else {
      const auto gen = d.get<std::string>("generator");
      if (gen == "blobs") {
        BlobsSpec b;
        b.num_classes = d.get<std::size_t>("num_classes", b.num_classes);
        b.samples_per_class = d.get<std::size_t>("samples_per_class", b.samples_per_class);
        b.dims = d.get<std::size_t>("dims", b.dims);
        b.spread = d.get<double>("spread", b.spread);
        b.center_distance = d.get<double>("center_distance", b.center_distance);
        b.seed = d.get<std::uint64_t>("seed", b.seed);
        c.dataset = b;
      } else if (gen == "rings") {
        RingsSpec rs;
        rs.num_rings = d.get<std::size_t>("num_rings", rs.num_rings);
        rs.samples_per_ring = d.get<std::size_t>("samples_per_ring", rs.samples_per_ring);
        rs.noise = d.get<double>("noise", rs.noise);
        rs.seed = d.get<std::uint64_t>("seed", rs.seed);
        c.dataset = rs;
      } else {
        throw ConfigError("config.dataset.generator: expected blobs or rings, got '" + gen + "'");
      }
    }
  }

  if (root.has("split")) {
    ObjectReader s(root.at("split"), "config.split");
    c.test_fraction = s.get<double>("test_fraction", c.test_fraction);
    c.split_seed = s.get<std::uint64_t>("seed", c.split_seed);
  }
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) {
    throw ConfigError("config.split.test_fraction: must lie in (0, 1)");
  }

  if (root.has("model")) {
    ObjectReader m(root.at("model"), "config.model");
    c.model.hidden_layers = m.get<std::vector<std::size_t>>("hidden_layers", c.model.hidden_layers);
    if (m.has("activation")) c.model.activation = parse_activation(m.get<std::string>("activation"));
    if (m.has("init_scheme")) c.model.init_scheme = parse_init(m.get<std::string>("init_scheme"));
    c.model.init_seed = m.get<std::uint64_t>("init_seed", c.model.init_seed);
    for (std::size_t w : c.model.hidden_layers) {
      if (w < 1) throw ConfigError("config.model.hidden_layers: widths must be >= 1");
    }
  }

  if (root.has("train")) {
    ObjectReader t(root.at("train"), "config.train");
    try {
      c.train = TrainConfig(t.get<std::size_t>("epochs", c.train.epochs),
                            t.get<std::size_t>("batch_size", c.train.batch_size),
                            t.get<double>("learning_rate", c.train.learning_rate),
                            t.get<std::uint64_t>("shuffle_seed", c.train.shuffle_seed));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("config.") + e.what());
    }
  }

  c.pool = parse_pool(root.at("pool"));
  c.pool.validate_against(c.model);

  if (root.has("grid_levels")) {
    const json& g = root.at("grid_levels");
    if (!g.is_object()) throw ConfigError("config.grid_levels: expected an object");
    for (const auto& [key, value] : g.items()) {
      const FactorKind kind = parse_factor(key);
      auto idx = c.pool.index_of(kind);
      if (!idx) throw ConfigError("config.grid_levels." + key + ": factor not in pool");
      const auto level = value.get<std::size_t>();
      if (level == 0 || level >= c.pool.level_count(*idx)) {
        throw ConfigError("config.grid_levels." + key + ": must name an existing non-off level");
      }
      c.grid_levels[factor_code(kind)] = level;
    }
  }

  if (root.has("engine")) {
    ObjectReader e(root.at("engine"), "config.engine");
    c.engine.name = e.get<std::string>("name", c.engine.name);
    if (e.has("ea")) {
      ObjectReader r(e.at("ea"), "config.engine.ea");
      auto& x = c.engine.ea;
      x.population_size = r.get<std::size_t>("population_size", x.population_size);
      x.generations = r.get<std::size_t>("generations", x.generations);
      x.epsilon = r.get<double>("epsilon", x.epsilon);
      x.replacement_rate = r.get<double>("replacement_rate", x.replacement_rate);
      x.seed = r.get<std::uint64_t>("seed", x.seed);
    }
    if (e.has("rl")) {
      ObjectReader r(e.at("rl"), "config.engine.rl");
      auto& x = c.engine.rl;
      x.episodes = r.get<std::size_t>("episodes", x.episodes);
      x.steps_per_episode = r.get<std::size_t>("steps_per_episode", x.steps_per_episode);
      x.learning_rate = r.get<double>("learning_rate", x.learning_rate);
      x.discount = r.get<double>("discount", x.discount);
      x.exploration = r.get<double>("exploration", x.exploration);
      x.ccdd_bins = r.get<std::size_t>("ccdd_bins", x.ccdd_bins);
      x.seed = r.get<std::uint64_t>("seed", x.seed);
    }
    if (e.has("smbo")) {
      ObjectReader r(e.at("smbo"), "config.engine.smbo");
      auto& x = c.engine.smbo;
      x.initial_samples = r.get<std::size_t>("initial_samples", x.initial_samples);
      x.iterations = r.get<std::size_t>("iterations", x.iterations);
      x.length_scale = r.get<double>("length_scale", x.length_scale);
      x.noise = r.get<double>("noise", x.noise);
      x.exploration = r.get<double>("exploration", x.exploration);
      x.seed = r.get<std::uint64_t>("seed", x.seed);
    }
    if (e.has("sway")) {
      ObjectReader r(e.at("sway"), "config.engine.sway");
      auto& x = c.engine.sway;
      x.candidate_sample_size = r.get<std::size_t>("candidate_sample_size", x.candidate_sample_size);
      x.size_threshold = r.get<std::size_t>("size_threshold", x.size_threshold);
      x.seed = r.get<std::uint64_t>("seed", x.seed);
    }
  }
  static const std::set<std::string> engines{"brute", "ea", "rl", "smbo", "sway"};
  if (!engines.contains(c.engine.name)) {
    throw ConfigError("config.engine.name: unknown engine '" + c.engine.name + "'");
  }
  c.engine.ea.validate();
  c.engine.rl.validate();
  c.engine.smbo.validate();
  c.engine.sway.validate();

  if (root.has("budget")) {
    ObjectReader b(root.at("budget"), "config.budget");
    c.budget.max_evaluations = b.get<std::size_t>("max_evaluations", c.budget.max_evaluations);
    c.budget.max_iterations = b.get<std::size_t>("max_iterations", c.budget.max_iterations);
  }
  c.budget.validate();

  c.master_seed = root.get<std::uint64_t>("master_seed", c.master_seed);
  c.parallelism = root.get<std::size_t>("parallelism", c.parallelism);
  if (c.parallelism < 1) throw ConfigError("config.parallelism: must be >= 1");
  if (root.has("output_dir")) {
    std::filesystem::path out = root.get<std::string>("output_dir");
    if (out.is_relative() && !base_dir.empty()) out = base_dir / out;
    c.output_dir = out;
  }
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment(j, path.parent_path());
}

Dataset make_dataset(const DatasetSpec& spec) {
  return std::visit(
      [](const auto& s) -> Dataset {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BlobsSpec>) {
          return gen_blobs(s);
        } else if constexpr (std::is_same_v<T, RingsSpec>) {
          return gen_rings(s.num_rings, s.samples_per_ring, s.noise, s.seed);
        } else {
          return load_csv(s.path, s.label_column);
        }
      },
      spec);
}

EvaluationContext make_context(const ExperimentConfig& config) {
  const Dataset data = make_dataset(config.dataset);
  if (data.num_classes < 2) throw DataError("dataset needs at least 2 classes");
  ModelConfig model = config.model;
  model.input_dim = data.dims();
  model.output_dim = data.num_classes;
  model.validate();
  config.pool.validate_against(model);
  return {config.pool, split(data, config.test_fraction, config.split_seed), model, config.train,
          config.master_seed};
}

ExperimentConfig standard_experiment() {
  ExperimentConfig c;
  c.dataset = BlobsSpec{3, 100, 2, 1.0, 1, -1.0};
  c.test_fraction = 0.3;
  c.split_seed = 2;
  c.model.hidden_layers = {16};
  c.model.activation = Activation::relu;
  c.model.init_scheme = InitScheme::kaiming;
  c.model.init_seed = 3;
  c.train = TrainConfig(60, 16, 0.05, 3);
  c.pool = PerturbationPool({
      {FactorKind::adversarial_attack,
       {FactorLevel::scalar(FactorKind::adversarial_attack, 0.0),
        FactorLevel::scalar(FactorKind::adversarial_attack, 0.003),
        FactorLevel::scalar(FactorKind::adversarial_attack, 0.05)}},
      {FactorKind::label_flipping,
       {FactorLevel::scalar(FactorKind::label_flipping, 0.0),
        FactorLevel::scalar(FactorKind::label_flipping, 0.1),
        FactorLevel::scalar(FactorKind::label_flipping, 0.2)}},
      {FactorKind::weight_modification,
       {FactorLevel::scalar(FactorKind::weight_modification, 0.0),
        FactorLevel::scalar(FactorKind::weight_modification, 0.25),
        FactorLevel::scalar(FactorKind::weight_modification, 0.5)}},
  });
  c.budget = {60, 100};
  c.master_seed = 42;
  return c;
}

}  // namespace vforge

#include "vforge/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace vforge {

Surface surface_of(FactorKind kind) {
  switch (kind) {
    case FactorKind::adversarial_attack:
    case FactorKind::out_of_distribution:
      return Surface::inputs;
    case FactorKind::label_flipping:
    case FactorKind::label_noise:
      return Surface::labels;
    default:
      return Surface::configuration;
  }
}

std::string factor_code(FactorKind kind) {
  return "F" + std::to_string(static_cast<int>(kind));
}

std::string factor_name(FactorKind kind) {
  switch (kind) {
    case FactorKind::adversarial_attack: return "adversarial_attack";
    case FactorKind::out_of_distribution: return "out_of_distribution";
    case FactorKind::label_flipping: return "label_flipping";
    case FactorKind::label_noise: return "label_noise";
    case FactorKind::weight_modification: return "weight_modification";
    case FactorKind::bias_modification: return "bias_modification";
    case FactorKind::fc_layer_modification: return "fc_layer_modification";
    case FactorKind::seed_override: return "seed_override";
  }
  return "unknown";
}

FactorKind parse_factor(std::string_view text) {
  static constexpr FactorKind kAll[] = {
      FactorKind::adversarial_attack,  FactorKind::out_of_distribution,
      FactorKind::label_flipping,      FactorKind::label_noise,
      FactorKind::weight_modification, FactorKind::bias_modification,
      FactorKind::fc_layer_modification, FactorKind::seed_override};
  for (FactorKind k : kAll) {
    if (text == factor_code(k) || text == factor_name(k)) return k;
  }
  throw ConfigError("unknown factor '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------

TauMatrix::TauMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() < 2 || values_.rows() != values_.cols()) {
    throw ConfigError("tau: must be a square matrix with at least 2 classes");
  }
  for (Eigen::Index r = 0; r < values_.rows(); ++r) {
    for (Eigen::Index c = 0; c < values_.cols(); ++c) {
      const double v = values_(r, c);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError("tau: entry (" + std::to_string(r) + ", " + std::to_string(c) +
                          ") outside [0, 1]");
      }
    }
    if (std::abs(values_.row(r).sum() - 1.0) > 1e-12) {
      throw ConfigError("tau: row " + std::to_string(r) + " does not sum to 1");
    }
  }
}

TauMatrix TauMatrix::identity(std::size_t classes) {
  const auto m = static_cast<Eigen::Index>(classes);
  return TauMatrix(Eigen::MatrixXd::Identity(m, m));
}

TauMatrix TauMatrix::uniform_off_diagonal(std::size_t classes, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("tau: flip rate must lie in [0, 1]");
  if (classes < 2) throw ConfigError("tau: at least 2 classes required");
  const auto m = static_cast<Eigen::Index>(classes);
  Eigen::MatrixXd t = Eigen::MatrixXd::Constant(m, m, rate / static_cast<double>(m - 1));
  t.diagonal().setConstant(1.0 - rate);
  return TauMatrix(std::move(t));
}

bool TauMatrix::is_identity() const {
  return values_ == Eigen::MatrixXd::Identity(values_.rows(), values_.cols());
}

// ---------------------------------------------------------------------------

FactorLevel FactorLevel::scalar(FactorKind kind, double amount) {
  FactorLevel l;
  l.kind = kind;
  l.amount = amount;
  return l;
}

FactorLevel FactorLevel::flip(TauMatrix tau) {
  FactorLevel l;
  l.kind = FactorKind::label_flipping;
  l.tau = std::move(tau);
  return l;
}

FactorLevel FactorLevel::width(std::int64_t delta) {
  FactorLevel l;
  l.kind = FactorKind::fc_layer_modification;
  l.width_delta = delta;
  return l;
}

FactorLevel FactorLevel::reseed(std::optional<std::uint64_t> seed) {
  FactorLevel l;
  l.kind = FactorKind::seed_override;
  l.seed = seed;
  return l;
}

bool FactorLevel::off() const {
  switch (kind) {
    case FactorKind::label_flipping:
      return tau ? tau->is_identity() : amount == 0.0;
    case FactorKind::fc_layer_modification:
      return width_delta == 0;
    case FactorKind::seed_override:
      return !seed.has_value();
    default:
      return amount == 0.0;
  }
}

void FactorLevel::validate() const {
  const std::string who = factor_code(kind) + ": ";
  switch (kind) {
    case FactorKind::adversarial_attack:
    case FactorKind::out_of_distribution:
    case FactorKind::weight_modification:
    case FactorKind::bias_modification:
      if (!(amount >= 0.0) || !std::isfinite(amount)) {
        throw ConfigError(who + "level parameter must be a finite value >= 0");
      }
      break;
    case FactorKind::label_flipping:
    case FactorKind::label_noise:
      if (!tau && !(amount >= 0.0 && amount <= 1.0)) {
        throw ConfigError(who + "rate must lie in [0, 1]");
      }
      break;
    case FactorKind::fc_layer_modification:
    case FactorKind::seed_override:
      break;
  }
}

// ---------------------------------------------------------------------------

std::string PerturbationStrategy::encoding() const {
  std::string out;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(levels[i]);
  }
  return out;
}

PerturbationPool::PerturbationPool(std::vector<Factor> factors) : factors_(std::move(factors)) {
  std::set<FactorKind> seen;
  for (const auto& f : factors_) {
    const std::string who = factor_code(f.kind) + ": ";
    if (!seen.insert(f.kind).second) throw ConfigError(who + "factor listed twice in pool");
    if (f.levels.empty()) throw ConfigError(who + "empty level set");
    std::size_t off_count = 0;
    for (const auto& l : f.levels) {
      if (l.kind != f.kind) throw ConfigError(who + "level belongs to another factor");
      l.validate();
      off_count += l.off() ? 1 : 0;
    }
    if (!f.levels.front().off()) throw ConfigError(who + "level 0 must be the off level");
    if (off_count != 1) throw ConfigError(who + "exactly one off level is allowed");
  }
}

std::optional<std::size_t> PerturbationPool::index_of(FactorKind kind) const {
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    if (factors_[i].kind == kind) return i;
  }
  return std::nullopt;
}

std::size_t PerturbationPool::size() const {
  std::size_t n = 1;
  for (const auto& f : factors_) n *= f.levels.size();
  return n;
}

std::size_t pool_size(const PerturbationPool& pool) { return pool.size(); }

PerturbationStrategy PerturbationPool::at(std::size_t ordinal) const {
  PerturbationStrategy ps{std::vector<std::size_t>(factors_.size(), 0)};
  for (std::size_t i = factors_.size(); i-- > 0;) {
    const std::size_t radix = factors_[i].levels.size();
    ps.levels[i] = ordinal % radix;
    ordinal /= radix;
  }
  return ps;
}

std::size_t PerturbationPool::ordinal(const PerturbationStrategy& ps) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < factors_.size(); ++i) n = n * factors_[i].levels.size() + ps.levels[i];
  return n;
}

std::vector<PerturbationStrategy> PerturbationPool::all() const {
  std::vector<PerturbationStrategy> out;
  const std::size_t n = size();
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(at(i));
  return out;
}

PerturbationStrategy PerturbationPool::all_off() const {
  return {std::vector<std::size_t>(factors_.size(), 0)};
}

bool PerturbationPool::contains(const PerturbationStrategy& ps) const {
  if (ps.levels.size() != factors_.size()) return false;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    if (ps.levels[i] >= factors_[i].levels.size()) return false;
  }
  return true;
}

PerturbationStrategy PerturbationPool::decode(std::string_view encoding) const {
  PerturbationStrategy ps;
  std::size_t start = 0;
  while (start <= encoding.size()) {
    const std::size_t dot = std::min(encoding.find('.', start), encoding.size());
    const std::string_view part = encoding.substr(start, dot - start);
    if (part.empty() || !std::all_of(part.begin(), part.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw ConfigError("strategy '" + std::string(encoding) + "' is not a dotted index list");
    }
    ps.levels.push_back(std::stoull(std::string(part)));
    start = dot + 1;
  }
  if (!contains(ps)) {
    throw ConfigError("strategy '" + std::string(encoding) + "' does not belong to the pool");
  }
  return ps;
}

void PerturbationPool::validate_against(const ModelConfig& model) const {
  auto f8 = index_of(FactorKind::fc_layer_modification);
  if (!f8 || model.hidden_layers.empty()) return;
  const auto width = static_cast<std::int64_t>(model.hidden_layers.front());
  for (const auto& l : factors_[*f8].levels) {
    if (width + l.width_delta < 1) {
      throw ConfigError("F8: width delta " + std::to_string(l.width_delta) +
                        " shrinks hidden layer of " + std::to_string(width) + " below 1");
    }
  }
}

// ---------------------------------------------------------------------------

Matrix apply_fgsm(const Parameters& model, const Matrix& x, const Labels& y, double sigma,
                  const std::vector<FeatureRange>& ranges) {
  if (!(sigma >= 0.0)) throw ConfigError("F1: sigma must be >= 0");
  if (sigma == 0.0) return x;
  if (ranges.size() != static_cast<std::size_t>(x.cols())) {
    throw ShapeError("F1: feature range count does not match input columns");
  }
  const Matrix grad = backward(model, x, y).inputs;
  Matrix out = x;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double g = grad(r, c);
      if (g == 0.0) continue;
      const double orig = x(r, c);
      const auto& range = ranges[static_cast<std::size_t>(c)];
      double v = orig + (g > 0.0 ? sigma : -sigma);
      v = std::clamp(v, std::min(range.min, orig), std::max(range.max, orig));
      // Rounding of orig + sigma can overshoot the ball by an ulp.
      while (std::abs(v - orig) > sigma) v = std::nextafter(v, orig);
      out(r, c) = v;
    }
  }
  return out;
}

Matrix apply_ood_shift(const Matrix& x, double magnitude, std::uint64_t seed, bool include_scale) {
  if (!(magnitude >= 0.0)) throw ConfigError("F2: magnitude must be >= 0");
  if (magnitude == 0.0) return x;
  Rng rng(seed);
  const Eigen::Index d = x.cols();

  Vector direction(d);
  for (Eigen::Index j = 0; j < d; ++j) direction(j) = rng.normal();
  if (direction.norm() == 0.0) direction.setConstant(1.0);
  const Vector shift = direction.normalized() * magnitude;

  Vector scale = Vector::Ones(d);
  if (include_scale) {
    for (Eigen::Index j = 0; j < d; ++j) scale(j) += rng.uniform(-magnitude, magnitude);
  }
  Matrix out = x * scale.asDiagonal();
  out.rowwise() += shift.transpose();
  return out;
}

Labels apply_label_flip(const Labels& y, const TauMatrix& tau, std::uint64_t seed) {
  const auto m = static_cast<int>(tau.classes());
  for (int label : y) {
    if (label < 0 || label >= m) {
      throw DataError("F3: label " + std::to_string(label) + " outside tau's " +
                      std::to_string(m) + " classes");
    }
  }
  if (tau.is_identity()) return y;
  Rng rng(seed);
  const auto& t = tau.values();
  Labels out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double u = rng.uniform();
    const auto row = static_cast<Eigen::Index>(y[i]);
    double cumulative = 0.0;
    int pick = -1;
    int last_nonzero = 0;
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      if (t(row, c) > 0.0) last_nonzero = static_cast<int>(c);
      cumulative += t(row, c);
      if (pick < 0 && u < cumulative) pick = static_cast<int>(c);
    }
    out[i] = pick < 0 ? last_nonzero : pick;
  }
  return out;
}

Labels apply_label_noise(const Labels& y, double rate, std::size_t num_classes, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("F4: rate must lie in [0, 1]");
  if (num_classes < 2) throw ConfigError("F4: at least 2 classes required");
  if (rate == 0.0) return y;
  Rng rng(seed);
  Labels out = y;
  for (int& label : out) {
    if (rng.uniform() < rate) {
      // Uniform over the other m - 1 classes.
      const auto other = static_cast<int>(rng.index(num_classes - 1));
      label = other >= label ? other + 1 : other;
    }
  }
  return out;
}

namespace {

template <typename Derived>
double entry_std(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() < 2) return 1.0;
  const double mean = m.mean();
  const double var = (m.array() - mean).square().mean();
  const double s = std::sqrt(var);
  return (s > 0.0 && std::isfinite(s)) ? s : 1.0;
}

}  // namespace

Parameters apply_weight_mod(const Parameters& theta, double scale, std::uint64_t seed) {
  if (!(scale >= 0.0)) throw ConfigError("F5: scale must be >= 0");
  if (scale == 0.0 || theta.layers.empty()) return theta;
  Rng rng(seed);
  Parameters out = theta;
  auto& w = out.layers[rng.index(out.layers.size())].weight;
  const double std = scale * entry_std(w);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] += std * rng.normal();
  return out;
}

Parameters apply_bias_mod(const Parameters& theta, double scale, std::uint64_t seed) {
  if (!(scale >= 0.0)) throw ConfigError("F6: scale must be >= 0");
  if (scale == 0.0 || theta.layers.empty()) return theta;
  Rng rng(seed);
  Parameters out = theta;
  auto& b = out.layers[rng.index(out.layers.size())].bias;
  const double std = scale * entry_std(b);
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) += std * rng.normal();
  return out;
}

ModelConfig apply_fc_layer_mod(const ModelConfig& config, std::int64_t width_delta) {
  if (width_delta == 0 || config.hidden_layers.empty()) return config;
  const auto width = static_cast<std::int64_t>(config.hidden_layers.front()) + width_delta;
  if (width < 1) throw ConfigError("F8: hidden width would drop below 1");
  ModelConfig out = config;
  out.hidden_layers.front() = static_cast<std::size_t>(width);
  return out;
}

SeededConfigs apply_seed_override(const ModelConfig& model, const TrainConfig& train,
                                  std::uint64_t new_seed) {
  SeededConfigs out{model, train};
  out.train.shuffle_seed = new_seed;
  out.model.init_seed = new_seed;
  return out;
}

// ---------------------------------------------------------------------------

std::uint64_t factor_seed(std::uint64_t master_seed, FactorKind kind,
                          const PerturbationStrategy& ps) {
  return Rng::derive(master_seed, factor_code(kind) + ":" + ps.encoding());
}

PerturbedBundle perturb(const PerturbationPool& pool, const PerturbationStrategy& ps,
                        const Matrix& test_inputs, const Labels& train_labels,
                        const ModelConfig& model_config, const TrainConfig& train_config,
                        std::size_t num_classes, std::uint64_t master_seed) {
  if (!pool.contains(ps)) throw ConfigError("strategy '" + ps.encoding() + "' is not in the pool");
  PerturbedBundle b{test_inputs, train_labels, model_config, train_config, {}};

  auto active = [&](FactorKind kind) -> const FactorLevel* {
    auto idx = pool.index_of(kind);
    if (!idx) return nullptr;
    const FactorLevel& level = pool.level(*idx, ps.levels[*idx]);
    return level.off() ? nullptr : &level;
  };

  if (auto* l = active(FactorKind::out_of_distribution)) {
    b.test_inputs = apply_ood_shift(b.test_inputs, l->amount,
                                    factor_seed(master_seed, l->kind, ps));
  }
  if (auto* l = active(FactorKind::label_flipping)) {
    const TauMatrix tau = l->tau ? *l->tau : TauMatrix::uniform_off_diagonal(num_classes, l->amount);
    if (tau.classes() != num_classes) {
      throw ConfigError("F3: tau has " + std::to_string(tau.classes()) + " classes, data has " +
                        std::to_string(num_classes));
    }
    b.train_labels = apply_label_flip(b.train_labels, tau, factor_seed(master_seed, l->kind, ps));
  }
  if (auto* l = active(FactorKind::label_noise)) {
    b.train_labels = apply_label_noise(b.train_labels, l->amount, num_classes,
                                       factor_seed(master_seed, l->kind, ps));
  }
  if (auto* l = active(FactorKind::fc_layer_modification)) {
    b.model_config = apply_fc_layer_mod(b.model_config, l->width_delta);
  }
  if (auto* l = active(FactorKind::seed_override)) {
    auto seeded = apply_seed_override(b.model_config, b.train_config, *l->seed);
    b.model_config = seeded.model;
    b.train_config = seeded.train;
  }
  if (auto* l = active(FactorKind::weight_modification)) {
    b.post_hoc.weight_noise = {l->amount, factor_seed(master_seed, l->kind, ps)};
  }
  if (auto* l = active(FactorKind::bias_modification)) {
    b.post_hoc.bias_noise = {l->amount, factor_seed(master_seed, l->kind, ps)};
  }
  if (auto* l = active(FactorKind::adversarial_attack)) {
    b.post_hoc.fgsm_sigma = l->amount;
  }
  return b;
}

FinishedModel finish_perturbation(const PerturbedBundle& bundle, Parameters trained,
                                  const Labels& test_labels,
                                  const std::vector<FeatureRange>& ranges) {
  const auto& ph = bundle.post_hoc;
  if (ph.weight_noise) trained = apply_weight_mod(trained, ph.weight_noise->first, ph.weight_noise->second);
  if (ph.bias_noise) trained = apply_bias_mod(trained, ph.bias_noise->first, ph.bias_noise->second);
  Matrix inputs = bundle.test_inputs;
  if (ph.fgsm_sigma) inputs = apply_fgsm(trained, inputs, test_labels, *ph.fgsm_sigma, ranges);
  return {std::move(trained), std::move(inputs)};
}

}  // namespace vforge

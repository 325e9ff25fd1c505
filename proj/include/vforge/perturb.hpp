#pragma once

#include "vforge/data.hpp"
#include "vforge/net.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vforge {

/// Robustness-affecting factors. Values follow the taxonomy numbering.
enum class FactorKind {
  adversarial_attack = 1,  // test inputs
  out_of_distribution = 2, // test inputs
  label_flipping = 3,      // train labels
  label_noise = 4,         // train labels
  weight_modification = 5, // trained weights
  bias_modification = 6,   // trained biases
  fc_layer_modification = 8,
  seed_override = 10,
};

enum class Surface { inputs, labels, configuration };

Surface surface_of(FactorKind kind);

/// "F1", "F3", ...
std::string factor_code(FactorKind kind);
/// "adversarial_attack", ...
std::string factor_name(FactorKind kind);
/// Accepts either the code or the name.
FactorKind parse_factor(std::string_view text);

/// Row-stochastic label transition matrix.
class TauMatrix {
 public:
  /// Throws ConfigError unless entries lie in [0, 1] and rows sum to 1 within 1e-12.
  explicit TauMatrix(Eigen::MatrixXd values);

  static TauMatrix identity(std::size_t classes);
  /// 1 - rate on the diagonal, rate / (m - 1) elsewhere.
  static TauMatrix uniform_off_diagonal(std::size_t classes, double rate);

  std::size_t classes() const { return static_cast<std::size_t>(values_.rows()); }
  const Eigen::MatrixXd& values() const { return values_; }
  bool is_identity() const;

  bool operator==(const TauMatrix& other) const { return values_ == other.values_; }

 private:
  Eigen::MatrixXd values_;
};

/// One pre-defined setting of a factor.
struct FactorLevel {
  FactorKind kind{};
  /// sigma (F1), shift magnitude (F2), flip rate (F3), noise rate (F4),
  /// noise scale (F5, F6).
  double amount = 0.0;
  /// Explicit transition matrix for F3; overrides `amount` when present.
  std::optional<TauMatrix> tau;
  /// F8 width change of the first hidden layer.
  std::int64_t width_delta = 0;
  /// F10 replacement seed; empty is the off level.
  std::optional<std::uint64_t> seed;

  static FactorLevel scalar(FactorKind kind, double amount);
  static FactorLevel flip(TauMatrix tau);
  static FactorLevel width(std::int64_t delta);
  static FactorLevel reseed(std::optional<std::uint64_t> seed);

  /// True when applying the level is the identity on its surface.
  bool off() const;
  /// Throws ConfigError for out-of-bounds parameters.
  void validate() const;
};

struct Factor {
  FactorKind kind{};
  std::vector<FactorLevel> levels;
};

/// A full assignment of one level index per pool factor.
struct PerturbationStrategy {
  std::vector<std::size_t> levels;

  /// Level indices joined by '.', e.g. "0.2.1". Injective over a pool.
  std::string encoding() const;

  auto operator<=>(const PerturbationStrategy&) const = default;
  bool operator==(const PerturbationStrategy&) const = default;
};

/// Cartesian product of factor level sets.
class PerturbationPool {
 public:
  PerturbationPool() = default;
  /// Throws ConfigError unless kinds are unique, every level set is non-empty,
  /// level 0 is the only off level, and every level validates.
  explicit PerturbationPool(std::vector<Factor> factors);

  const std::vector<Factor>& factors() const { return factors_; }
  std::size_t num_factors() const { return factors_.size(); }
  std::size_t level_count(std::size_t factor) const { return factors_[factor].levels.size(); }
  const FactorLevel& level(std::size_t factor, std::size_t index) const {
    return factors_[factor].levels[index];
  }
  std::optional<std::size_t> index_of(FactorKind kind) const;

  /// Product of the level-set sizes.
  std::size_t size() const;

  /// Enumeration order is lexicographic in level indices, first factor slowest.
  PerturbationStrategy at(std::size_t ordinal) const;
  std::size_t ordinal(const PerturbationStrategy& ps) const;
  std::vector<PerturbationStrategy> all() const;
  PerturbationStrategy all_off() const;

  bool contains(const PerturbationStrategy& ps) const;
  /// Inverse of PerturbationStrategy::encoding; throws ConfigError.
  PerturbationStrategy decode(std::string_view encoding) const;

  /// Rejects F8 levels that would shrink the first hidden layer below 1.
  void validate_against(const ModelConfig& model) const;

 private:
  std::vector<Factor> factors_;
};

std::size_t pool_size(const PerturbationPool& pool);

// Individual factors. Every one is the identity at its off level.

/// Fast gradient sign step of size sigma on the loss of `model`, clamped to
/// `ranges` and then to the sigma ball in the max norm.
Matrix apply_fgsm(const Parameters& model, const Matrix& x, const Labels& y, double sigma,
                  const std::vector<FeatureRange>& ranges);

/// Random per-feature rescaling bounded by `magnitude` plus a shift along a
/// random direction of norm `magnitude`.
Matrix apply_ood_shift(const Matrix& x, double magnitude, std::uint64_t seed,
                       bool include_scale = true);

/// Resamples every label from its row of `tau`.
Labels apply_label_flip(const Labels& y, const TauMatrix& tau, std::uint64_t seed);

/// With probability `rate`, replaces a label by a uniform draw over the other classes.
Labels apply_label_noise(const Labels& y, double rate, std::size_t num_classes, std::uint64_t seed);

/// Additive Gaussian noise on one randomly chosen weight matrix, std scaled by
/// that matrix's own entry std (1 when degenerate).
Parameters apply_weight_mod(const Parameters& theta, double scale, std::uint64_t seed);

/// Same as apply_weight_mod for one bias vector.
Parameters apply_bias_mod(const Parameters& theta, double scale, std::uint64_t seed);

/// Changes the first hidden width; identity for hidden-free networks.
ModelConfig apply_fc_layer_mod(const ModelConfig& config, std::int64_t width_delta);

struct SeededConfigs {
  ModelConfig model;
  TrainConfig train;
};

/// Replaces the shuffle seed and propagates it to the init seed.
SeededConfigs apply_seed_override(const ModelConfig& model, const TrainConfig& train,
                                  std::uint64_t new_seed);

/// Modifications that need the trained model.
struct PostHocModifiers {
  std::optional<std::pair<double, std::uint64_t>> weight_noise;  // scale, seed
  std::optional<std::pair<double, std::uint64_t>> bias_noise;
  std::optional<double> fgsm_sigma;

  bool empty() const { return !weight_noise && !bias_noise && !fgsm_sigma; }
};

struct PerturbedBundle {
  Matrix test_inputs;
  Labels train_labels;
  ModelConfig model_config;
  TrainConfig train_config;
  PostHocModifiers post_hoc;
};

/// Pre-training half of a strategy: F2, F3, F4, F8, F10 in that order. The
/// trained-model half is deferred to `finish_perturbation`.
PerturbedBundle perturb(const PerturbationPool& pool, const PerturbationStrategy& ps,
                        const Matrix& test_inputs, const Labels& train_labels,
                        const ModelConfig& model_config, const TrainConfig& train_config,
                        std::size_t num_classes, std::uint64_t master_seed);

struct FinishedModel {
  Parameters model;
  Matrix test_inputs;
};

/// Applies F5 and F6 to the trained model, then F1 against the resulting model.
FinishedModel finish_perturbation(const PerturbedBundle& bundle, Parameters trained,
                                  const Labels& test_labels,
                                  const std::vector<FeatureRange>& ranges);

/// Child seed of a stochastic factor inside strategy `ps`.
std::uint64_t factor_seed(std::uint64_t master_seed, FactorKind kind,
                          const PerturbationStrategy& ps);

}  // namespace vforge

#pragma once

// Minimal deterministic feed-forward classifier. Everything here is templated
// on the scalar type; the rest of the library uses the double instantiation.

#include "vforge/errors.hpp"
#include "vforge/rng.hpp"
#include "vforge/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace vforge {

enum class Activation { relu, tanh };
enum class InitScheme { kaiming, xavier };

struct ModelConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_layers;
  std::size_t output_dim = 2;
  Activation activation = Activation::relu;
  InitScheme init_scheme = InitScheme::kaiming;
  std::uint64_t init_seed = 0;

  void validate() const {
    if (input_dim < 1) throw ConfigError("model: input_dim must be >= 1");
    if (output_dim < 2) throw ConfigError("model: output_dim must be >= 2");
    for (std::size_t w : hidden_layers) {
      if (w < 1) throw ConfigError("model: every hidden width must be >= 1");
    }
  }

  /// input_dim, hidden widths..., output_dim.
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w{input_dim};
    w.insert(w.end(), hidden_layers.begin(), hidden_layers.end());
    w.push_back(output_dim);
    return w;
  }

  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  std::size_t epochs;
  std::size_t batch_size;
  double learning_rate;
  std::uint64_t shuffle_seed;

  TrainConfig(std::size_t epochs_, std::size_t batch_size_, double learning_rate_,
              std::uint64_t shuffle_seed_)
      : epochs(epochs_),
        batch_size(batch_size_),
        learning_rate(learning_rate_),
        shuffle_seed(shuffle_seed_) {
    validate();
  }

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("train: learning_rate must be a positive finite number");
    }
  }

  bool operator==(const TrainConfig&) const = default;
};

template <typename Scalar>
struct Layer {
  MatrixX<Scalar> weight;  // out x in
  VectorX<Scalar> bias;    // out
};

template <typename Scalar>
struct BasicParameters {
  std::vector<Layer<Scalar>> layers;
  ModelConfig arch;

  bool finite() const {
    return std::all_of(layers.begin(), layers.end(), [](const Layer<Scalar>& l) {
      return l.weight.allFinite() && l.bias.allFinite();
    });
  }

  /// Same layer shapes and byte-identical entries.
  bool bitwise_equals(const BasicParameters& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (!bitwise_equal(layers[i].weight, other.layers[i].weight)) return false;
      if (!bitwise_equal(layers[i].bias, other.layers[i].bias)) return false;
    }
    return true;
  }

  /// Zeroed parameters of identical shape.
  BasicParameters zeros_like() const {
    BasicParameters z{{}, arch};
    for (const auto& l : layers) {
      z.layers.push_back({MatrixX<Scalar>::Zero(l.weight.rows(), l.weight.cols()),
                          VectorX<Scalar>::Zero(l.bias.size())});
    }
    return z;
  }
};

using Parameters = BasicParameters<double>;

template <typename Scalar>
struct BasicGradients {
  BasicParameters<Scalar> params;
  MatrixX<Scalar> inputs;
  Scalar loss = 0;
};

using Gradients = BasicGradients<double>;

template <typename Scalar>
BasicParameters<Scalar> init_parameters(const ModelConfig& config) {
  config.validate();
  const auto widths = config.widths();
  Rng rng(config.init_seed);
  BasicParameters<Scalar> p{{}, config};
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l];
    const std::size_t fan_out = widths[l + 1];
    Layer<Scalar> layer{MatrixX<Scalar>(fan_out, fan_in), VectorX<Scalar>::Zero(fan_out)};
    if (config.init_scheme == InitScheme::kaiming) {
      const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
        layer.weight.data()[i] = static_cast<Scalar>(rng.normal(0.0, std));
      }
    } else {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
        layer.weight.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
      }
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

namespace detail {

template <typename Scalar>
void check_inputs(const BasicParameters<Scalar>& params, const MatrixX<Scalar>& inputs) {
  if (params.layers.empty()) throw ShapeError("network has no layers");
  if (inputs.cols() != params.layers.front().weight.cols()) {
    throw ShapeError("input has " + std::to_string(inputs.cols()) + " columns, network expects " +
                     std::to_string(params.layers.front().weight.cols()));
  }
}

template <typename Scalar>
MatrixX<Scalar> activate(const MatrixX<Scalar>& z, Activation a) {
  if (a == Activation::relu) return z.cwiseMax(Scalar(0));
  return z.array().tanh().matrix();
}

/// Derivative expressed through the pre-activation z and post-activation h.
template <typename Scalar>
MatrixX<Scalar> activation_grad(const MatrixX<Scalar>& z, const MatrixX<Scalar>& h,
                                Activation a) {
  if (a == Activation::relu) {
    return (z.array() > Scalar(0)).template cast<Scalar>().matrix();
  }
  return (Scalar(1) - h.array().square()).matrix();
}

/// Row-wise softmax with max subtraction.
template <typename Scalar>
MatrixX<Scalar> softmax_rows(const MatrixX<Scalar>& logits) {
  MatrixX<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto e = (logits.row(r).array() - logits.row(r).maxCoeff()).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

template <typename Scalar>
struct ForwardCache {
  std::vector<MatrixX<Scalar>> pre;   // z per layer
  std::vector<MatrixX<Scalar>> post;  // input followed by h per layer (last = probs)
};

template <typename Scalar>
ForwardCache<Scalar> forward_cached(const BasicParameters<Scalar>& params,
                                    const MatrixX<Scalar>& inputs) {
  check_inputs(params, inputs);
  ForwardCache<Scalar> c;
  c.post.push_back(inputs);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    MatrixX<Scalar> z = c.post.back() * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    const bool last = l + 1 == params.layers.size();
    c.post.push_back(last ? softmax_rows(z) : activate(z, params.arch.activation));
    c.pre.push_back(std::move(z));
  }
  return c;
}

template <typename Scalar>
void check_labels(const std::vector<int>& labels, Eigen::Index rows, Eigen::Index classes) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw ShapeError("label count " + std::to_string(labels.size()) + " != sample count " +
                     std::to_string(rows));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw DataError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                      " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

}  // namespace detail

/// Per-sample class probabilities.
template <typename Scalar>
MatrixX<Scalar> forward(const BasicParameters<Scalar>& params, const MatrixX<Scalar>& inputs) {
  return detail::forward_cached(params, inputs).post.back();
}

/// Mean cross-entropy of the true class.
template <typename Scalar>
Scalar loss(const MatrixX<Scalar>& probs, const Labels& labels) {
  detail::check_labels<Scalar>(labels, probs.rows(), probs.cols());
  if (labels.empty()) return Scalar(0);
  Scalar total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Scalar p = std::max(probs(static_cast<Eigen::Index>(i), labels[i]),
                        std::numeric_limits<Scalar>::min());
    total -= std::log(p);
  }
  return total / static_cast<Scalar>(labels.size());
}

/// Reverse-mode gradients of the mean cross-entropy loss.
template <typename Scalar>
BasicGradients<Scalar> backward(const BasicParameters<Scalar>& params,
                                const MatrixX<Scalar>& inputs, const Labels& labels) {
  auto cache = detail::forward_cached(params, inputs);
  const MatrixX<Scalar>& probs = cache.post.back();
  detail::check_labels<Scalar>(labels, probs.rows(), probs.cols());

  BasicGradients<Scalar> g{params.zeros_like(), {}, loss(probs, labels)};
  const Scalar n = static_cast<Scalar>(std::max<std::size_t>(labels.size(), 1));

  MatrixX<Scalar> delta = probs;
  for (std::size_t i = 0; i < labels.size(); ++i) delta(static_cast<Eigen::Index>(i), labels[i]) -= 1;
  delta /= n;

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& layer = params.layers[l];
    g.params.layers[l].weight.noalias() = delta.transpose() * cache.post[l];
    g.params.layers[l].bias = delta.colwise().sum().transpose();
    MatrixX<Scalar> upstream = delta * layer.weight;
    if (l == 0) {
      g.inputs = std::move(upstream);
    } else {
      delta = upstream.cwiseProduct(detail::activation_grad(cache.pre[l - 1], cache.post[l],
                                                            params.arch.activation));
    }
  }
  return g;
}

/// Per-row argmax of probabilities; ties go to the lowest index.
template <typename Scalar>
Labels argmax_rows(const MatrixX<Scalar>& probs) {
  Labels out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < probs.cols(); ++c) {
      if (probs(r, c) > probs(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

template <typename Scalar>
Labels predict(const BasicParameters<Scalar>& params, const MatrixX<Scalar>& inputs) {
  return argmax_rows(forward(params, inputs));
}

/// Mini-batch SGD on mean cross-entropy. Each epoch shuffles with a child
/// generator of shuffle_seed keyed by the epoch index.
template <typename Scalar>
BasicParameters<Scalar> train(const MatrixX<Scalar>& x, const Labels& y,
                              const ModelConfig& model_config, const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) {
    throw ShapeError("train: " + std::to_string(x.rows()) + " samples but " +
                     std::to_string(y.size()) + " labels");
  }
  if (x.rows() == 0) throw DataError("train: empty training set");
  if (train_config.batch_size > y.size()) {
    throw ConfigError("train: batch_size " + std::to_string(train_config.batch_size) +
                      " exceeds training set size " + std::to_string(y.size()));
  }
  detail::check_labels<Scalar>(y, x.rows(), static_cast<Eigen::Index>(model_config.output_dim));

  auto params = init_parameters<Scalar>(model_config);
  if (x.cols() != static_cast<Eigen::Index>(model_config.input_dim)) {
    throw ShapeError("train: data has " + std::to_string(x.cols()) + " features, model expects " +
                     std::to_string(model_config.input_dim));
  }

  const Rng root(train_config.shuffle_seed);
  const Scalar lr = static_cast<Scalar>(train_config.learning_rate);
  std::vector<Eigen::Index> order(y.size());
  MatrixX<Scalar> batch_x;
  Labels batch_y;

  for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng epoch_rng = root.child(static_cast<std::uint64_t>(epoch));
    epoch_rng.shuffle(std::span<Eigen::Index>(order));

    for (std::size_t start = 0; start < order.size(); start += train_config.batch_size) {
      const std::size_t count = std::min(train_config.batch_size, order.size() - start);
      batch_x.resize(static_cast<Eigen::Index>(count), x.cols());
      batch_y.resize(count);
      for (std::size_t k = 0; k < count; ++k) {
        batch_x.row(static_cast<Eigen::Index>(k)) = x.row(order[start + k]);
        batch_y[k] = y[static_cast<std::size_t>(order[start + k])];
      }
      auto g = backward(params, batch_x, batch_y);
      if (!std::isfinite(static_cast<double>(g.loss))) {
        throw DivergenceError(epoch, "train: non-finite loss in epoch " + std::to_string(epoch));
      }
      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        params.layers[l].weight -= lr * g.params.layers[l].weight;
        params.layers[l].bias -= lr * g.params.layers[l].bias;
      }
    }
    if (!params.finite()) {
      throw DivergenceError(epoch, "train: non-finite parameters after epoch " +
                                       std::to_string(epoch));
    }
  }
  return params;
}

}  // namespace vforge

#pragma once

#include "vforge/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

namespace vforge::testing {

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
  return m;
}

inline Labels random_labels(Rng& rng, std::size_t n, std::size_t classes) {
  Labels y(n);
  for (auto& v : y) v = static_cast<int>(rng.index(classes));
  return y;
}

/// Random small network with random (non-zero) biases.
inline Parameters random_network(Rng& rng, std::size_t max_hidden_layers = 2,
                                 std::size_t max_width = 20) {
  ModelConfig mc;
  mc.input_dim = 1 + rng.index(5);
  mc.output_dim = 2 + rng.index(4);
  const std::size_t hidden = rng.index(max_hidden_layers + 1);
  for (std::size_t i = 0; i < hidden; ++i) mc.hidden_layers.push_back(1 + rng.index(max_width));
  mc.activation = rng.index(2) == 0 ? Activation::relu : Activation::tanh;
  mc.init_scheme = rng.index(2) == 0 ? InitScheme::kaiming : InitScheme::xavier;
  mc.init_seed = rng.next_u64();
  auto p = init_parameters<double>(mc);
  for (auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = rng.normal(0.0, 0.3);
  }
  return p;
}

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-4) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Max relative error of backward() against central differences with step h
/// over every weight, bias and input entry.
inline double gradient_check(const Parameters& params, const Matrix& x, const Labels& y,
                             double h = 1e-5) {
  const auto g = backward(params, x, y);
  auto objective = [&](const Parameters& p, const Matrix& in) {
    return loss(forward(p, in), y);
  };
  double worst = 0.0;
  Parameters p = params;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& w = p.layers[l].weight;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double orig = w.data()[i];
      w.data()[i] = orig + h;
      const double up = objective(p, x);
      w.data()[i] = orig - h;
      const double down = objective(p, x);
      w.data()[i] = orig;
      worst = std::max(worst, relative_error(g.params.layers[l].weight.data()[i],
                                             (up - down) / (2 * h)));
    }
    auto& b = p.layers[l].bias;
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      const double orig = b[i];
      b[i] = orig + h;
      const double up = objective(p, x);
      b[i] = orig - h;
      const double down = objective(p, x);
      b[i] = orig;
      worst = std::max(worst, relative_error(g.params.layers[l].bias[i], (up - down) / (2 * h)));
    }
  }
  Matrix in = x;
  for (Eigen::Index i = 0; i < in.size(); ++i) {
    const double orig = in.data()[i];
    in.data()[i] = orig + h;
    const double up = objective(params, in);
    in.data()[i] = orig - h;
    const double down = objective(params, in);
    in.data()[i] = orig;
    worst = std::max(worst, relative_error(g.inputs.data()[i], (up - down) / (2 * h)));
  }
  return worst;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* root = std::getenv("VF_TEST_TMP");
  auto dir = std::filesystem::path(root ? root : std::filesystem::temp_directory_path().string()) /
             name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace vforge::testing

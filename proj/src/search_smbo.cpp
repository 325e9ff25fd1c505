#include "vforge/search.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace vforge {

void SmboConfig::validate() const {
  if (initial_samples < 2) throw ConfigError("smbo: initial_samples must be >= 2");
  if (!(length_scale > 0.0)) throw ConfigError("smbo: length_scale must be > 0");
  if (!(noise >= 0.0)) throw ConfigError("smbo: noise must be >= 0");
  if (!(exploration >= 0.0)) throw ConfigError("smbo: exploration must be >= 0");
}

GaussianProcess::GaussianProcess(double length_scale, double noise)
    : length_scale_(length_scale), noise_(noise) {}

double GaussianProcess::kernel(std::span<const double> a, std::span<const double> b) const {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return std::exp(-0.5 * d2 / (length_scale_ * length_scale_));
}

void GaussianProcess::fit(const std::vector<std::vector<double>>& points,
                          const std::vector<double>& targets) {
  if (points.empty() || points.size() != targets.size()) {
    throw ShapeError("gp: need one target per point and at least one point");
  }
  points_ = points;
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::Map<const Eigen::VectorXd> y(targets.data(), n);
  y_mean_ = y.mean();
  const double var = (y.array() - y_mean_).square().mean();
  y_scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
  const Eigen::VectorXd z = (y.array() - y_mean_) / y_scale_;

  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = kernel(points_[static_cast<std::size_t>(i)], points_[static_cast<std::size_t>(j)]);
    }
  }
  // Jitter keeps the factorization defined for noiseless duplicates.
  k.diagonal().array() += noise_ + 1e-10;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw ConfigError("gp: kernel matrix is not positive definite");
  chol_l_ = llt.matrixL();
  alpha_ = llt.solve(z);
}

GaussianProcess::Prediction GaussianProcess::predict(std::span<const double> point) const {
  const auto n = static_cast<Eigen::Index>(points_.size());
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) ks(i) = kernel(point, points_[static_cast<std::size_t>(i)]);
  const double mean = ks.dot(alpha_);
  const Eigen::VectorXd v = chol_l_.triangularView<Eigen::Lower>().solve(ks);
  const double var = std::max(0.0, 1.0 - v.squaredNorm());
  return {y_mean_ + y_scale_ * mean, y_scale_ * std::sqrt(var)};
}

double expected_improvement(const GaussianProcess::Prediction& p, double incumbent,
                            double exploration) {
  const double gain = p.mean - incumbent - exploration;
  if (p.stddev <= 0.0) return std::max(0.0, gain);
  const double z = gain / p.stddev;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return std::max(0.0, gain * cdf + p.stddev * pdf);
}

SearchResult search_smbo(Evaluator& evaluator, const SmboConfig& config,
                         const SearchBudget& budget) {
  config.validate();
  SearchSession session(evaluator, budget, "smbo");
  const PerturbationPool& pool = evaluator.pool();
  const std::size_t pool_n = pool.size();
  Rng rng(config.seed);

  std::vector<std::size_t> ordinals(pool_n);
  std::iota(ordinals.begin(), ordinals.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(ordinals));
  std::vector<PerturbationStrategy> seeds;
  for (std::size_t i = 0; i < std::min(config.initial_samples, pool_n); ++i) {
    seeds.push_back(pool.at(ordinals[i]));
  }
  session.evaluate(seeds);

  std::vector<bool> evaluated(pool_n, false);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  auto observe = [&](const PerturbationStrategy& ps) {
    const auto* r = session.seen(ps);
    if (!r) return;
    evaluated[pool.ordinal(ps)] = true;
    xs.push_back(encode_real(pool, ps));
    ys.push_back(r->pv);
  };
  for (const auto& ps : seeds) observe(ps);

  GaussianProcess gp(config.length_scale, config.noise);
  const std::size_t iterations = std::min(config.iterations, session.max_iterations());
  for (std::size_t it = 0; it < iterations && !session.exhausted() && !xs.empty(); ++it) {
    gp.fit(xs, ys);
    const double incumbent = *std::max_element(ys.begin(), ys.end());
    std::optional<std::size_t> pick;
    double best_ei = -1.0;
    // Ordinals ascend in level-vector order, so strict > keeps the lowest on ties.
    for (std::size_t o = 0; o < pool_n; ++o) {
      if (evaluated[o]) continue;
      const auto x = encode_real(pool, pool.at(o));
      const double ei = expected_improvement(gp.predict(x), incumbent, config.exploration);
      if (ei > best_ei) {
        best_ei = ei;
        pick = o;
      }
    }
    if (!pick) break;  // pool exhausted
    const auto ps = pool.at(*pick);
    if (!session.evaluate(ps)) break;
    observe(ps);
  }
  return std::move(session).finish();
}

}  // namespace vforge

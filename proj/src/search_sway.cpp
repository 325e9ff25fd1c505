#include "vforge/search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vforge {

void SwayConfig::validate() const {
  if (size_threshold < 2) throw ConfigError("sway: size_threshold must be >= 2");
  if (candidate_sample_size != 0 && candidate_sample_size < size_threshold) {
    throw ConfigError("sway: candidate_sample_size must be >= size_threshold");
  }
}

namespace {

struct Candidate {
  PerturbationStrategy strategy;
  std::vector<double> point;
};

double distance(const Candidate& a, const Candidate& b) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.point.size(); ++i) {
    d2 += (a.point[i] - b.point[i]) * (a.point[i] - b.point[i]);
  }
  return std::sqrt(d2);
}

/// Farthest candidate from `from`; ties go to the lowest strategy.
std::size_t farthest(const std::vector<Candidate>& c, const Candidate& from) {
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double d = distance(c[i], from);
    if (d > best_d || (d == best_d && c[i].strategy < c[best].strategy)) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

}  // namespace

SearchResult search_sway(Evaluator& evaluator, const SwayConfig& config,
                         const SearchBudget& budget) {
  config.validate();
  SearchSession session(evaluator, budget, "sway");
  const PerturbationPool& pool = evaluator.pool();
  const std::size_t pool_n = pool.size();
  Rng rng(config.seed);

  std::vector<std::size_t> ordinals(pool_n);
  std::iota(ordinals.begin(), ordinals.end(), std::size_t{0});
  if (config.candidate_sample_size != 0 && config.candidate_sample_size < pool_n) {
    rng.shuffle(std::span<std::size_t>(ordinals));
    ordinals.resize(config.candidate_sample_size);
    std::sort(ordinals.begin(), ordinals.end());
  }
  std::vector<Candidate> candidates;
  for (std::size_t o : ordinals) {
    auto ps = pool.at(o);
    candidates.push_back({ps, encode_real(pool, ps)});
  }

  std::size_t rounds = 0;
  while (candidates.size() > config.size_threshold && !session.exhausted() &&
         rounds < session.max_iterations()) {
    ++rounds;
    // Divide: poles from a random anchor, then FASTMAP projection.
    const Candidate& anchor = candidates[rng.index(candidates.size())];
    const Candidate east = candidates[farthest(candidates, anchor)];
    const Candidate west = candidates[farthest(candidates, east)];
    const double c = distance(east, west);

    std::vector<std::pair<double, std::size_t>> projected;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const double a = distance(candidates[i], east);
      const double b = distance(candidates[i], west);
      const double x = c > 0.0 ? (a * a + c * c - b * b) / (2.0 * c) : 0.0;
      projected.emplace_back(x, i);
    }
    std::sort(projected.begin(), projected.end(), [&](const auto& p, const auto& q) {
      if (p.first != q.first) return p.first < q.first;
      return candidates[p.second].strategy < candidates[q.second].strategy;
    });

    // Conquer: the poles represent their halves.
    const std::vector<PerturbationStrategy> poles{east.strategy, west.strategy};
    const auto scores = session.evaluate(poles);
    if (!scores[0] || !scores[1]) break;

    // Prune the half whose representative scored lower; ties keep east.
    const std::size_t half = projected.size() / 2;
    const bool keep_east = scores[0]->pv >= scores[1]->pv;
    std::vector<Candidate> kept;
    for (std::size_t k = keep_east ? 0 : half; k < (keep_east ? half : projected.size()); ++k) {
      kept.push_back(candidates[projected[k].second]);
    }
    candidates = std::move(kept);
  }

  // Base case: evaluate what is left.
  std::vector<PerturbationStrategy> remaining;
  for (const auto& c : candidates) remaining.push_back(c.strategy);
  session.evaluate(remaining);
  return std::move(session).finish();
}

}  // namespace vforge

#include "vforge/search.hpp"

#include <algorithm>
#include <numeric>

namespace vforge {

void EaConfig::validate() const {
  if (population_size < 4) {
    throw ConfigError("ea: population_size must be >= 4 (three distinct partners per individual)");
  }
  if (generations < 1) throw ConfigError("ea: generations must be >= 1");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("ea: epsilon must lie in (0, 1]");
  if (!(replacement_rate >= 0.0 && replacement_rate <= 1.0)) {
    throw ConfigError("ea: replacement_rate must lie in [0, 1]");
  }
}

PerturbationStrategy de_mutant(const PerturbationPool& pool, const PerturbationStrategy& r1,
                               const PerturbationStrategy& r2, const PerturbationStrategy& r3,
                               double epsilon) {
  const auto a = encode_real(pool, r1);
  const auto b = encode_real(pool, r2);
  const auto c = encode_real(pool, r3);
  std::vector<double> m(a.size());
  for (std::size_t j = 0; j < m.size(); ++j) m[j] = a[j] + epsilon * (b[j] - c[j]);
  return decode_real(pool, m);
}

PerturbationStrategy de_crossover(const PerturbationStrategy& parent,
                                  const PerturbationStrategy& mutant,
                                  std::span<const double> draws, double replacement_rate) {
  PerturbationStrategy child = mutant;
  for (std::size_t j = 0; j < child.levels.size(); ++j) {
    if (draws[j] < replacement_rate) child.levels[j] = parent.levels[j];
  }
  return child;
}

SearchResult search_ea(Evaluator& evaluator, const EaConfig& config, const SearchBudget& budget) {
  config.validate();
  SearchSession session(evaluator, budget, "ea");
  const PerturbationPool& pool = evaluator.pool();
  const std::size_t pool_n = pool.size();
  const std::size_t pop_n = config.population_size;
  Rng rng(config.seed);

  // Initial population: distinct strategies while the pool allows it.
  std::vector<std::size_t> ordinals(pool_n);
  std::iota(ordinals.begin(), ordinals.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(ordinals));
  std::vector<PerturbationStrategy> population;
  for (std::size_t i = 0; i < pop_n; ++i) {
    population.push_back(pool.at(i < pool_n ? ordinals[i] : rng.index(pool_n)));
  }
  auto evaluated = session.evaluate(population);
  std::vector<double> fitness(pop_n, 0.0);
  for (std::size_t i = 0; i < pop_n; ++i) {
    if (!evaluated[i]) {
      // Budget ran out during seeding; fill unaffordable slots with evaluated members.
      population[i] = population[0];
      evaluated[i] = evaluated[0];
    }
    fitness[i] = evaluated[i] ? evaluated[i]->pv : 0.0;
  }

  const std::size_t generations = std::min(config.generations, session.max_iterations());
  std::vector<double> draws(pool.num_factors());
  for (std::size_t g = 0; g < generations && !session.exhausted(); ++g) {
    std::vector<PerturbationStrategy> children;
    children.reserve(pop_n);
    for (std::size_t i = 0; i < pop_n; ++i) {
      std::size_t r[3];
      for (std::size_t k = 0; k < 3; ++k) {
        do {
          r[k] = rng.index(pop_n);
        } while (r[k] == i || std::find(r, r + k, r[k]) != r + k);
      }
      const auto mutant =
          de_mutant(pool, population[r[0]], population[r[1]], population[r[2]], config.epsilon);
      for (double& d : draws) d = rng.uniform();
      children.push_back(de_crossover(population[i], mutant, draws, config.replacement_rate));
    }

    const auto scored = session.evaluate(children);
    for (std::size_t i = 0; i < pop_n; ++i) {
      if (!scored[i]) continue;
      // Selection maximizes performance variance; ties favour the child.
      if (scored[i]->pv >= fitness[i]) {
        population[i] = children[i];
        fitness[i] = scored[i]->pv;
      }
    }
  }
  return std::move(session).finish();
}

}  // namespace vforge

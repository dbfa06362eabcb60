#pragma once

// (mu + lambda) evolution strategy with Gaussian mutation and 1/5th-rule
// step-size control.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

#include "cmrl/rng.hpp"

namespace cmrl {

struct Genome {
  std::vector<double> weights;
  double fitness = -std::numeric_limits<double>::infinity();
  bool evaluated = false;

  bool operator==(const Genome&) const = default;
};

struct EvolutionConfig {
  std::size_t mu = 5;
  std::size_t lambda = 20;
  double sigma = 0.1;
  std::size_t generations = 10;
  bool adapt_sigma = true;
  double sigma_min = 1e-5;
  double sigma_max = 2.0;

  void validate() const;
};

struct GenerationLog {
  std::size_t generation = 0;  // 0 is the initial population
  double best = 0.0;           // best fitness ever seen so far
  double mean = 0.0;           // mean fitness of the surviving parents
};

struct EvolutionResult {
  Genome best;
  std::vector<Genome> population;  // the mu survivors, best first
  double sigma = 0.0;
  std::vector<GenerationLog> log;
  std::size_t evaluations = 0;
};

/// Fitness of a weight vector. A thrown exception marks the genome as failed:
/// fitness -inf, never selected while a finite competitor exists.
using FitnessFn = std::function<double(const std::vector<double>&)>;

/// Evaluates `population`, then runs `cfg.generations` generations. The
/// returned best genome is the highest-fitness one ever evaluated.
EvolutionResult evolve(std::vector<Genome> population, const FitnessFn& evaluate, const EvolutionConfig& cfg,
                       Rng& rng);

std::vector<Genome> random_population(std::size_t count, std::size_t dimension, double scale, Rng& rng);

void write_genomes(std::ostream& out, const std::vector<Genome>& genomes);
std::vector<Genome> read_genomes(std::istream& in);

}  // namespace cmrl

#include "cmrl/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "cmrl/errors.hpp"
#include "cmrl/text_io.hpp"

namespace cmrl {

void EvolutionConfig::validate() const {
  if (mu < 1) throw std::invalid_argument("evolution.mu must be >= 1");
  if (lambda < mu) throw std::invalid_argument("evolution.lambda must be >= evolution.mu");
  if (!(sigma > 0)) throw std::invalid_argument("evolution.sigma must be positive");
  if (!(sigma_min > 0) || !(sigma_max >= sigma_min)) throw std::invalid_argument("bad evolution sigma bounds");
}

namespace {

constexpr double kAdapt = 0.85;

double evaluate_safely(const FitnessFn& evaluate, const std::vector<double>& w) {
  try {
    const double f = evaluate(w);
    return std::isnan(f) ? -std::numeric_limits<double>::infinity() : f;
  } catch (const std::exception&) {
    return -std::numeric_limits<double>::infinity();
  }
}

// Best first; equal fitness keeps the earlier entry.
void rank(std::vector<Genome>& pool) {
  std::stable_sort(pool.begin(), pool.end(), [](const Genome& a, const Genome& b) { return a.fitness > b.fitness; });
}

// Truncates to `keep`, dropping failed genomes unless nothing else survives.
void select(std::vector<Genome>& pool, std::size_t keep) {
  rank(pool);
  const auto finite = static_cast<std::size_t>(std::count_if(
      pool.begin(), pool.end(), [](const Genome& g) { return g.fitness > -std::numeric_limits<double>::infinity(); }));
  std::size_t n = std::min(keep, pool.size());
  if (finite > 0) n = std::min(n, finite);
  pool.resize(n);
}

double mean_fitness(const std::vector<Genome>& pool) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& g : pool) {
    if (std::isfinite(g.fitness)) {
      sum += g.fitness;
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : -std::numeric_limits<double>::infinity();
}

}  // namespace

EvolutionResult evolve(std::vector<Genome> population, const FitnessFn& evaluate, const EvolutionConfig& cfg,
                       Rng& rng) {
  cfg.validate();
  if (population.empty()) throw std::invalid_argument("evolve needs a non-empty initial population");
  const std::size_t dim = population.front().weights.size();
  for (const auto& g : population) {
    if (g.weights.size() != dim) throw DimensionError("genomes in a population must have equal length");
  }

  EvolutionResult result;
  result.sigma = cfg.sigma;
  for (auto& g : population) {
    g.fitness = evaluate_safely(evaluate, g.weights);
    g.evaluated = true;
    ++result.evaluations;
  }
  select(population, cfg.mu);
  result.best = population.front();
  result.log.push_back({0, result.best.fitness, mean_fitness(population)});

  for (std::size_t gen = 1; gen <= cfg.generations; ++gen) {
    std::vector<Genome> pool = population;
    std::size_t successes = 0;
    for (std::size_t k = 0; k < cfg.lambda; ++k) {
      const auto& parent = population[uniform_index(rng, population.size())];
      Genome child;
      child.weights = parent.weights;
      for (auto& w : child.weights) w += result.sigma * normal(rng);
      child.fitness = evaluate_safely(evaluate, child.weights);
      child.evaluated = true;
      ++result.evaluations;
      if (child.fitness > parent.fitness) ++successes;
      if (child.fitness > result.best.fitness) result.best = child;
      pool.push_back(std::move(child));
    }
    if (cfg.adapt_sigma) {
      const double rate = static_cast<double>(successes) / static_cast<double>(cfg.lambda);
      if (rate > 0.2) {
        result.sigma /= kAdapt;
      } else if (rate < 0.2) {
        result.sigma *= kAdapt;
      }
      result.sigma = std::clamp(result.sigma, cfg.sigma_min, cfg.sigma_max);
    }
    select(pool, cfg.mu);
    population = std::move(pool);
    result.log.push_back({gen, result.best.fitness, mean_fitness(population)});
  }
  result.population = std::move(population);
  return result;
}

std::vector<Genome> random_population(std::size_t count, std::size_t dimension, double scale, Rng& rng) {
  std::vector<Genome> pop(count);
  for (auto& g : pop) {
    g.weights.resize(dimension);
    for (auto& w : g.weights) w = scale * normal(rng);
  }
  return pop;
}

void write_genomes(std::ostream& out, const std::vector<Genome>& genomes) {
  out << "genomes," << genomes.size() << ',' << (genomes.empty() ? 0 : genomes.front().weights.size()) << '\n';
  for (const auto& g : genomes) {
    std::string line = "genome," + std::string(g.evaluated ? "1" : "0") + ',' + text::format_real(g.fitness);
    text::append_reals(line, g.weights);
    out << line << '\n';
  }
}

std::vector<Genome> read_genomes(std::istream& in) {
  auto h = text::split_owned(text::expect_line(in, "genome header"));
  if (h.size() != 3 || h[0] != "genomes") throw FormatError("bad genome header");
  const auto count = static_cast<std::size_t>(text::parse_uint(h[1]));
  const auto dim = static_cast<std::size_t>(text::parse_uint(h[2]));
  std::vector<Genome> genomes(count);
  for (auto& g : genomes) {
    auto f = text::split_owned(text::expect_line(in, "genome"));
    if (f.size() != dim + 3 || f[0] != "genome") throw FormatError("bad genome line");
    g.evaluated = f[1] == "1";
    g.fitness = text::parse_real(f[2]);
    g.weights = text::parse_reals(f, 3, dim);
  }
  return genomes;
}

}  // namespace cmrl

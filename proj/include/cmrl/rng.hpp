#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace cmrl {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);
std::uint64_t fnv1a64(std::span<const double> values, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Seed of the named sub-stream `name` under `master`.
std::uint64_t derive_seed(std::uint64_t master, std::string_view name);

// The std:: distributions are implementation-defined; these are not, so
// seeded runs reproduce across standard libraries.

/// Uniform in [0, 1).
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
/// Standard normal via Box-Muller. Consumes two draws, caches nothing.
double normal(Rng& rng);
/// Uniform integer in [0, n). n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Named random sub-streams split off a master seed. Every stochastic draw
/// in a run goes through one of these so that runs are reproducible and
/// independent components do not perturb each other.
class StreamSet {
 public:
  explicit StreamSet(std::uint64_t master = 0) : master_(master) {}

  std::uint64_t master() const { return master_; }
  Rng& stream(const std::string& name);

  void write(std::ostream& out) const;
  static StreamSet read(std::istream& in);

 private:
  std::uint64_t master_;
  std::map<std::string, Rng> streams_;
};

}  // namespace cmrl

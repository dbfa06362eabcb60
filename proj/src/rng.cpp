#include "cmrl/rng.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "cmrl/errors.hpp"
#include "cmrl/text_io.hpp"

namespace cmrl {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::span<const double> values, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view name) {
  return splitmix64(master ^ fnv1a64(name));
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double normal(Rng& rng) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t range = n;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

Rng& StreamSet::stream(const std::string& name) {
  auto it = streams_.find(name);
  if (it == streams_.end()) it = streams_.emplace(name, Rng(derive_seed(master_, name))).first;
  return it->second;
}

void StreamSet::write(std::ostream& out) const {
  out << "streams," << master_ << ',' << streams_.size() << '\n';
  for (const auto& [name, engine] : streams_) {
    std::ostringstream state;
    state << engine;
    out << "stream," << name << ',' << state.str() << '\n';
  }
}

StreamSet StreamSet::read(std::istream& in) {
  auto header = text::split_owned(text::expect_line(in, "stream header"));
  if (header.size() != 3 || header[0] != "streams") throw FormatError("bad stream header");
  StreamSet set(text::parse_uint(header[1]));
  auto count = text::parse_uint(header[2]);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto line = text::expect_line(in, "stream state");
    auto fields = text::split(line);
    if (fields.size() != 3 || fields[0] != "stream") throw FormatError("bad stream line");
    std::istringstream state{std::string(fields[2])};
    Rng engine;
    state >> engine;
    if (state.fail()) throw FormatError("corrupt generator state for stream " + std::string(fields[1]));
    set.streams_.emplace(std::string(fields[1]), engine);
  }
  return set;
}

}  // namespace cmrl

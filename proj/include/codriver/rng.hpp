#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace codriver::rng {

/// Independent stream namespaces so keys from different subsystems never collide.
enum class Domain : std::uint64_t {
  analyzer = 1,
  road = 2,
  bus = 3,
  dataset = 4,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counterfactual stream: a generator whose sequence is a pure function of
/// (seed, domain, keys...). Draw order elsewhere never affects it.
inline std::mt19937_64 stream(std::uint64_t seed, Domain domain,
                              std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(domain)));
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632BE59BD9B4E019ULL));
  return std::mt19937_64(h);
}

inline double uniform01(std::mt19937_64& g) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(g);
}

inline double standard_normal(std::mt19937_64& g) {
  return std::normal_distribution<double>(0.0, 1.0)(g);
}

}  // namespace codriver::rng

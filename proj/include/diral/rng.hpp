#pragma once

#include <cstdint>
#include <random>

namespace diral {

// Seeded random source used everywhere in the simulator. Wraps mt19937_64
// so a run's draw sequence is fully determined by the seed and call order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }

  // Inclusive on both ends.
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(gen_);
  }

  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(gen_);
  }

  // Independent stream derived from this rng's seed and a stream id.
  // Lets a run hand out decorrelated sub-generators (mobility, exploration,
  // sampling) without draw-order coupling between them.
  static Rng fork(std::uint64_t seed, std::uint64_t stream) {
    return Rng(splitmix64(seed) ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 gen_;
};

}  // namespace diral

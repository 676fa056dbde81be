#ifndef STIC_RNG_HPP
#define STIC_RNG_HPP

#include <cstdint>
#include <random>

namespace stic {

/// Seeded random stream. Every stochastic component takes an Rng (or a fork
/// of one) so that a run is fully determined by its root seed. Forking is a
/// pure function of (seed, tag), which keeps chains reproducible no matter
/// when or on which thread they are consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const { return seed_; }

  /// Derive an independent child stream. Children with distinct tags are
  /// decorrelated regardless of how much the parent has been consumed.
  Rng fork(std::uint64_t tag) const { return Rng(mix(seed_ ^ (tag + 0x9e3779b97f4a7c15ULL))); }

  /// Uniform in [0, 1).
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  // splitmix64 finalizer; spreads low-entropy seeds over the full state.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace stic

#endif  // STIC_RNG_HPP

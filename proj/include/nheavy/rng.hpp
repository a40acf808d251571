#pragma once

#include <cstdint>
#include <random>

namespace nheavy {

// Stream splitting: every random quantity is drawn from an Rng built by
// derive_seed(seed, stream) chains, e.g. replication q of a Monte Carlo study
// uses derive_seed(derive_seed(seed, q), component) with a fixed component id
// per stage (network, innovations, diffusion, noise, ...). Streams are therefore
// independent of worker count and scheduling order.

/// splitmix64 finalizer applied to (seed, stream); bijective in seed for fixed stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

enum class Stream : std::uint64_t {
  network = 1,
  innovations = 2,
  diffusion = 3,
  noise = 4,
  volatility = 5,
  scales = 6,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream) {
  return derive_seed(seed, static_cast<std::uint64_t>(stream));
}

class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : engine_(derive_seed(seed, stream)) {}
  Rng(std::uint64_t seed, Stream stream) : engine_(derive_seed(seed, stream)) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal() { return normal_(engine_); }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  bool bernoulli(double p) { return uniform() < p; }

  engine_type& engine() { return engine_; }

 private:
  engine_type engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace nheavy

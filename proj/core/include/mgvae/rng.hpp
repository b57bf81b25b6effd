#pragma once

#include <cstdint>
#include <random>

namespace mgvae {

std::uint64_t splitmix64(std::uint64_t& state);

// Seeded random stream. All randomness in the library is drawn through an
// explicitly passed Rng; there is no global generator. Uniform and normal
// draws are derived from raw 64-bit words so that results are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  // Independent child stream; deterministic in (this stream's seed, tag).
  Rng split(std::uint64_t tag) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  double normal();
  // Standard Gumbel(0, 1) via -log(-log(u)).
  double gumbel();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mgvae

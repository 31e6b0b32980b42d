#pragma once

#include <cstdint>

namespace panoscan {

// Deterministic, platform-independent generator (xoshiro256++ seeded via
// splitmix64). std::random distributions are implementation-defined, so all
// sampling goes through this class to keep runs byte-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Inclusive integer range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Standard normal via Box-Muller (one spare cached).
  double normal();

  // Poisson sample; inversion for mu < 30, rounded normal approximation above.
  std::int64_t poisson(double mu);

  // Independent child stream derived from this generator's seed and a key.
  // Children with distinct keys are decorrelated and order-independent.
  Rng child(std::uint64_t key) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

// FNV-1a over a byte range; used for stable name-keyed stream derivation and
// content hashing in tests.
std::uint64_t fnv1a(const void* data, std::size_t len,
                    std::uint64_t basis = 1469598103934665603ull);
std::uint64_t fnv1a_str(const char* s);

}  // namespace panoscan

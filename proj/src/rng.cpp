#include "panoscan/rng.hpp"

#include <cmath>
#include <cstring>

#include "panoscan/errors.hpp"

namespace panoscan {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw ArgumentError("uniform_int: hi < lo");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  // Rejection-free modulo is fine here; span is tiny relative to 2^64.
  return lo + static_cast<std::int64_t>(next_u64() % span);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_normal_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::int64_t Rng::poisson(double mu) {
  if (mu < 0.0) throw ArgumentError("poisson: negative mean");
  if (mu == 0.0) return 0;
  if (mu < 30.0) {
    // Inversion by sequential search.
    const double p0 = std::exp(-mu);
    double p = p0;
    double cum = p;
    const double u = uniform();
    std::int64_t n = 0;
    while (u > cum && n < 4096) {
      ++n;
      p *= mu / static_cast<double>(n);
      cum += p;
    }
    return n;
  }
  const double n = std::round(mu + std::sqrt(mu) * normal());
  return n < 0.0 ? 0 : static_cast<std::int64_t>(n);
}

Rng Rng::child(std::uint64_t key) const {
  std::uint64_t x = seed_ ^ (0x9e3779b97f4a7c15ull * (key + 1));
  return Rng(splitmix64(x));
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t basis) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = basis;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a_str(const char* s) { return fnv1a(s, std::strlen(s)); }

}  // namespace panoscan

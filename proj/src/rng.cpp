#include "qci/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace qci {

namespace {

uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) {
  uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

Rng Rng::derive(uint64_t master_seed, uint64_t stream_id) {
  // Mix the stream id through splitmix64 before seeding so that adjacent
  // chunk ids produce unrelated states.
  uint64_t x = master_seed ^ 0xa02bdbf7bb3c0a7ULL;
  uint64_t a = splitmix64(x);
  uint64_t y = stream_id ^ 0x6a09e667f3bcc909ULL;
  uint64_t b = splitmix64(y);
  return Rng(a ^ rotl(b, 17));
}

uint64_t Rng::next_u64() {
  const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return double(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // Box-Muller; 1 - uniform() keeps the log argument away from zero.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(a);
  has_cached_normal_ = true;
  return r * std::cos(a);
}

double Rng::normal(double mean, double stddev) {
  return mean + stddev * normal();
}

long long Rng::poisson(double mean) {
  if (mean < 0.0 || !std::isfinite(mean))
    throw std::invalid_argument("poisson: mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  // Knuth's product method is exact; split large means so exp(-mean)
  // never underflows.
  long long total = 0;
  double remaining = mean;
  while (remaining > 500.0) {
    total += poisson(500.0);
    remaining -= 500.0;
  }
  const double limit = std::exp(-remaining);
  double prod = uniform();
  long long k = 0;
  while (prod > limit) {
    prod *= uniform();
    ++k;
  }
  return total + k;
}

long long Rng::binomial(long long n, double p) {
  if (p < 0.0 || p > 1.0)
    throw std::invalid_argument("binomial: p must be in [0, 1]");
  long long k = 0;
  for (long long i = 0; i < n; ++i)
    if (uniform() < p) ++k;
  return k;
}

}  // namespace qci

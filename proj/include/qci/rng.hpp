#pragma once

#include <cstdint>

namespace qci {

// Splittable deterministic RNG: xoshiro256++ seeded through splitmix64.
// Every stochastic component owns a stream derived from (master seed,
// stream id), so accumulated statistics do not depend on how work is
// partitioned across threads.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  // Stream for worker chunk / subsystem `stream_id` of a master seed.
  static Rng derive(uint64_t master_seed, uint64_t stream_id);

  uint64_t next_u64();
  double uniform();                       // [0, 1)
  double normal();                        // standard normal
  double normal(double mean, double stddev);
  long long poisson(double mean);
  long long binomial(long long n, double p);

 private:
  uint64_t s_[4];
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace qci

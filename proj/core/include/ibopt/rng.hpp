#pragma once

#include <cstdint>
#include <cmath>

namespace ibopt {

// Purpose tag separating RNG streams that belong to the same (seed, worker,
// round) cell, so e.g. delay draws never shift method draws.
enum class StreamKind : std::uint64_t {
  method = 0,   // per-worker per-round draws (subsets, coins, minibatches)
  server = 1,   // server-side joint draws (shared SAGA indices, CD_shared set)
  delay = 2,    // asynchronous delay schedule
  problem = 3,  // problem synthesis
  shard = 4,    // data sharding
};

inline constexpr std::uint32_t kServerWorkerId = 0xffffffffu;

// xoshiro256++ with deterministic stream derivation from
// (master seed, worker id, round, purpose). Traces must be bit-reproducible
// across platforms, which rules out std:: distributions.
class Rng {
 public:
  Rng() : Rng(0x9e3779b97f4a7c15ull) {}
  explicit Rng(std::uint64_t seed);

  static Rng stream(std::uint64_t master_seed, std::uint32_t worker_id,
                    std::uint64_t round, StreamKind kind = StreamKind::method);

  std::uint64_t next_u64();

  // Uniform integer in [0, n), unbiased (bitmask rejection).
  std::uint64_t uniform_below(std::uint64_t n);

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (two uniforms per call, no cached spare).
  double normal();

 private:
  std::uint64_t s_[4];
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace ibopt

#include "ibopt/rng.hpp"

namespace ibopt {

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}
}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& w : s_) w = splitmix64(sm);
}

Rng Rng::stream(std::uint64_t master_seed, std::uint32_t worker_id,
                std::uint64_t round, StreamKind kind) {
  std::uint64_t sm = master_seed;
  std::uint64_t a = splitmix64(sm);
  sm ^= (static_cast<std::uint64_t>(worker_id) << 1) | 1u;
  std::uint64_t b = splitmix64(sm);
  sm ^= round * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull;
  std::uint64_t c = splitmix64(sm);
  sm ^= static_cast<std::uint64_t>(kind) + 0x632be59bd9b4e019ull;
  std::uint64_t d = splitmix64(sm);
  Rng r;
  r.s_[0] = a;
  r.s_[1] = b;
  r.s_[2] = c;
  r.s_[3] = d | 1u;  // never all-zero state
  // Decorrelate nearby keys.
  for (int i = 0; i < 4; ++i) r.next_u64();
  return r;
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

std::uint64_t Rng::uniform_below(std::uint64_t n) {
  if (n <= 1) return 0;
  std::uint64_t mask = ~0ull;
  std::uint64_t range = n - 1;
  mask >>= __builtin_clzll(range | 1);
  std::uint64_t x;
  do {
    x = next_u64() & mask;
  } while (x >= n);
  return x;
}

double Rng::normal() {
  // Box-Muller; u clamped away from 0 so log stays finite.
  double u = uniform01();
  if (u < 0x1.0p-53) u = 0x1.0p-53;
  double v = uniform01();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925286766559 * v);
}

}  // namespace ibopt

#include "ibopt/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ibopt {

BlockPartition partition_uniform(int d, int m) {
  if (m < 1 || d < 1 || m > d) {
    throw std::invalid_argument("partition_uniform: need 1 <= m <= d, got d=" +
                                std::to_string(d) + " m=" + std::to_string(m));
  }
  BlockPartition part;
  part.d = d;
  part.m = m;
  part.offsets.resize(m + 1);
  const int big = (d + m - 1) / m;  // ceil(d/m)
  const int small = d / m;
  const int n_big = d % m;
  int off = 0;
  for (int b = 0; b < m; ++b) {
    part.offsets[b] = off;
    off += (b < n_big) ? big : small;
  }
  part.offsets[m] = off;
  return part;
}

int resolve_block_count(const BlockPartition& part, double tau) {
  const double km = tau * part.m;
  const int k = static_cast<int>(std::llround(km));
  if (k < 1 || k > part.m || std::abs(km - k) > 1e-9) {
    std::ostringstream msg;
    msg << "tau*m must be an integer in [1, m]; got tau=" << tau
        << " with m=" << part.m << " (tau*m=" << km << ").";
    int lo = std::max<int>(1, static_cast<int>(std::floor(km)));
    int hi = std::min<int>(part.m, static_cast<int>(std::ceil(km)));
    msg << " Nearest feasible tau values: " << static_cast<double>(lo) / part.m;
    if (hi != lo) msg << " and " << static_cast<double>(hi) / part.m;
    throw std::invalid_argument(msg.str());
  }
  return k;
}

BlockSample sample_subset(const BlockPartition& part, double tau, Rng& rng) {
  const int k = resolve_block_count(part, tau);
  BlockSample s;
  s.partition = &part;
  if (k == part.m) {
    s.blocks.resize(part.m);
    std::iota(s.blocks.begin(), s.blocks.end(), 0);
    return s;  // no draws consumed; keeps tau=1 reductions bit-exact
  }
  // Partial Fisher-Yates over block indices: uniform over subsets, O(m).
  std::vector<int> idx(part.m);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j =
        i + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(part.m - i)));
    std::swap(idx[i], idx[j]);
  }
  s.blocks.assign(idx.begin(), idx.begin() + k);
  std::sort(s.blocks.begin(), s.blocks.end());
  return s;
}

bool sample_bernoulli(double tau, Rng& rng) {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("sample_bernoulli: tau must be in (0,1], got " +
                                std::to_string(tau));
  }
  if (tau == 1.0) return true;
  return rng.uniform01() < tau;
}

BlockSample full_sample(const BlockPartition& part) {
  BlockSample s;
  s.partition = &part;
  s.blocks.resize(part.m);
  std::iota(s.blocks.begin(), s.blocks.end(), 0);
  return s;
}

BlockSample complement(const BlockSample& s) {
  BlockSample c;
  c.partition = s.partition;
  c.blocks.reserve(s.partition->m - s.count());
  std::size_t pos = 0;
  for (int b = 0; b < s.partition->m; ++b) {
    if (pos < s.blocks.size() && s.blocks[pos] == b) {
      ++pos;
    } else {
      c.blocks.push_back(b);
    }
  }
  return c;
}

Vector mask(const Vector& x, const BlockSample& s) {
  const BlockPartition& p = *s.partition;
  if (x.size() != p.d) {
    throw std::invalid_argument("mask: vector dimension " +
                                std::to_string(x.size()) +
                                " does not match partition d=" +
                                std::to_string(p.d));
  }
  Vector out = Vector::Zero(p.d);
  for (int b : s.blocks) {
    out.segment(p.block_begin(b), p.block_size(b)) =
        x.segment(p.block_begin(b), p.block_size(b));
  }
  return out;
}

void masked_axpy(Vector& dest, double coef, const Vector& src,
                 const BlockSample& s) {
  const BlockPartition& p = *s.partition;
  for (int b : s.blocks) {
    dest.segment(p.block_begin(b), p.block_size(b)) +=
        coef * src.segment(p.block_begin(b), p.block_size(b));
  }
}

void masked_assign(Vector& dest, const Vector& src, const BlockSample& s) {
  const BlockPartition& p = *s.partition;
  for (int b : s.blocks) {
    dest.segment(p.block_begin(b), p.block_size(b)) =
        src.segment(p.block_begin(b), p.block_size(b));
  }
}

double subset_count(int m, int k) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) c = c * (m - i) / (i + 1);
  return c;
}

std::vector<BlockSample> enumerate_subsets(const BlockPartition& part,
                                           double tau) {
  const int k = resolve_block_count(part, tau);
  const double total = subset_count(part.m, k);
  if (total > 1e6) {
    throw std::invalid_argument("enumerate_subsets: C(" +
                                std::to_string(part.m) + "," +
                                std::to_string(k) + ") exceeds 1e6");
  }
  std::vector<BlockSample> out;
  out.reserve(static_cast<std::size_t>(total));
  std::vector<int> comb(k);
  std::iota(comb.begin(), comb.end(), 0);
  while (true) {
    BlockSample s;
    s.partition = &part;
    s.blocks = comb;
    out.push_back(std::move(s));
    int i = k - 1;
    while (i >= 0 && comb[i] == part.m - k + i) --i;
    if (i < 0) break;
    ++comb[i];
    for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
  }
  return out;
}

}  // namespace ibopt

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "ibopt/rng.hpp"

namespace ibopt {

using Vector = Eigen::VectorXd;

// Partition of the d coordinates into m contiguous, non-overlapping blocks
// covering [0, d). offsets has m+1 strictly increasing entries with
// offsets[0] = 0 and offsets[m] = d.
struct BlockPartition {
  int d = 0;
  int m = 0;
  std::vector<int> offsets;

  int block_size(int b) const { return offsets[b + 1] - offsets[b]; }
  int block_begin(int b) const { return offsets[b]; }
};

// Sorted subset of block indices of one partition.
struct BlockSample {
  const BlockPartition* partition = nullptr;
  std::vector<int> blocks;

  int count() const { return static_cast<int>(blocks.size()); }
};

// First (d mod m) blocks get ceil(d/m) coordinates, the rest floor(d/m).
BlockPartition partition_uniform(int d, int m);

// Number of blocks tau*m, which must be an integer (checked to 1e-9);
// otherwise throws naming the nearest feasible tau values.
int resolve_block_count(const BlockPartition& part, double tau);

// Uniform over all C(m, tau*m) subsets; consumes no draws when tau*m == m.
BlockSample sample_subset(const BlockPartition& part, double tau, Rng& rng);

// True with probability tau; tau must be in (0, 1].
bool sample_bernoulli(double tau, Rng& rng);

BlockSample full_sample(const BlockPartition& part);
BlockSample complement(const BlockSample& s);

// Copies coordinates inside selected blocks, zeros elsewhere.
Vector mask(const Vector& x, const BlockSample& s);

// dest.segment(b) += coef * src.segment(b) for every selected block b.
void masked_axpy(Vector& dest, double coef, const Vector& src,
                 const BlockSample& s);

// dest.segment(b) = src.segment(b) for every selected block b.
void masked_assign(Vector& dest, const Vector& src, const BlockSample& s);

// All tau*m-subsets in lexicographic order; guarded at C(m, tau*m) <= 1e6.
std::vector<BlockSample> enumerate_subsets(const BlockPartition& part,
                                           double tau);

double subset_count(int m, int k);

}  // namespace ibopt

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ibopt/trace.hpp"

namespace ibopt {

// Row-sparse dataset in the LibSVM sense: per-row (index, value) pairs with
// strictly increasing 0-based indices, labels in {-1, +1}.
struct SparseDataset {
  int n_rows = 0;
  int d = 0;
  std::vector<std::int64_t> row_offsets;  // n_rows + 1
  std::vector<int> col_index;
  std::vector<double> values;
  std::vector<double> labels;

  std::int64_t row_nnz(int r) const { return row_offsets[r + 1] - row_offsets[r]; }
};

// Grammar: one example per line, `<label> <idx>:<val> ...`, 1-based indices,
// labels in {+1, -1, 1, 0} with 0 remapped to -1, `#` starts a comment.
// d defaults to the maximum index seen; d_override (when > 0) widens it.
SparseDataset parse_libsvm(std::istream& in, int d_override = 0);
SparseDataset load_libsvm(const std::string& path, int d_override = 0);

void serialize_libsvm(const SparseDataset& ds, std::ostream& out);

// Scales every row to unit Euclidean norm; all-zero rows are an error.
SparseDataset normalize_rows(const SparseDataset& ds);

// Random permutation split into n_workers shards with sizes differing by at
// most one; shards are disjoint and cover all rows.
std::vector<std::vector<int>> partition_data(const SparseDataset& ds,
                                             int n_workers,
                                             std::uint64_t seed);

// CSV columns exactly: round,subopt,dist_sq,grad_sq,lyapunov,blocks_up,blocks_down
// with an empty lyapunov cell when absent. Doubles use shortest round-trip
// representation so write/read is bit-exact.
void write_trace_csv(const Trace& trace, std::ostream& out);
void write_trace_csv(const Trace& trace, const std::string& path);
Trace read_trace_csv(std::istream& in);
Trace read_trace_csv(const std::string& path);

std::string format_double(double v);
double parse_double(const std::string& s);

// Flat key = value configuration text; '#' comments, keys validated by the
// experiment layer. Preserves first-seen order for deterministic output.
struct KeyValueConfig {
  std::vector<std::pair<std::string, std::string>> entries;

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  void set(const std::string& key, const std::string& value);
};

KeyValueConfig parse_key_value(std::istream& in);
KeyValueConfig load_key_value(const std::string& path);
void write_key_value(const KeyValueConfig& cfg, std::ostream& out);

}  // namespace ibopt

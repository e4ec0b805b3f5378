#include "ibopt/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ibopt/rng.hpp"

namespace ibopt {

namespace {

[[noreturn]] void parse_fail(int line_no, const std::string& what) {
  throw std::runtime_error("libsvm parse error at line " +
                           std::to_string(line_no) + ": " + what);
}

}  // namespace

SparseDataset parse_libsvm(std::istream& in, int d_override) {
  SparseDataset ds;
  ds.row_offsets.push_back(0);
  std::string line;
  int line_no = 0;
  int max_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank or comment-only line

    double label;
    if (tok == "+1" || tok == "1") {
      label = 1.0;
    } else if (tok == "-1") {
      label = -1.0;
    } else if (tok == "0") {
      label = -1.0;  // {0,1} corpora remapped to {-1,+1}
    } else {
      parse_fail(line_no, "label '" + tok + "' not in {+1,-1,1,0}");
    }

    int prev_index = 0;  // external indices are 1-based
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) {
        parse_fail(line_no, "malformed token '" + tok + "' (expected idx:val)");
      }
      int idx = 0;
      const char* ib = tok.data();
      const char* ie = tok.data() + colon;
      auto ir = std::from_chars(ib, ie, idx);
      if (ir.ec != std::errc() || ir.ptr != ie || idx < 1) {
        parse_fail(line_no, "bad feature index in '" + tok + "'");
      }
      double val = 0;
      const char* vb = tok.data() + colon + 1;
      const char* ve = tok.data() + tok.size();
      auto vr = std::from_chars(vb, ve, val);
      if (vr.ec != std::errc() || vr.ptr != ve) {
        parse_fail(line_no, "bad feature value in '" + tok + "'");
      }
      if (idx == prev_index) {
        parse_fail(line_no, "duplicate feature index " + std::to_string(idx));
      }
      if (idx < prev_index) {
        parse_fail(line_no, "non-monotone feature index " + std::to_string(idx));
      }
      prev_index = idx;
      max_index = std::max(max_index, idx);
      ds.col_index.push_back(idx - 1);
      ds.values.push_back(val);
    }
    ds.labels.push_back(label);
    ds.row_offsets.push_back(static_cast<std::int64_t>(ds.col_index.size()));
    ++ds.n_rows;
  }
  if (ds.n_rows == 0) {
    throw std::runtime_error("libsvm parse error: empty input");
  }
  ds.d = std::max(max_index, d_override);
  if (d_override > 0 && d_override < max_index) {
    throw std::runtime_error("libsvm: d override " + std::to_string(d_override) +
                             " smaller than max index " + std::to_string(max_index));
  }
  return ds;
}

SparseDataset load_libsvm(const std::string& path, int d_override) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open dataset file: " + path);
  return parse_libsvm(f, d_override);
}

void serialize_libsvm(const SparseDataset& ds, std::ostream& out) {
  for (int r = 0; r < ds.n_rows; ++r) {
    out << (ds.labels[r] > 0 ? "+1" : "-1");
    for (std::int64_t k = ds.row_offsets[r]; k < ds.row_offsets[r + 1]; ++k) {
      out << ' ' << (ds.col_index[k] + 1) << ':' << format_double(ds.values[k]);
    }
    out << '\n';
  }
}

SparseDataset normalize_rows(const SparseDataset& ds) {
  SparseDataset out = ds;
  for (int r = 0; r < ds.n_rows; ++r) {
    double sq = 0;
    for (std::int64_t k = ds.row_offsets[r]; k < ds.row_offsets[r + 1]; ++k) {
      sq += ds.values[k] * ds.values[k];
    }
    if (sq == 0) {
      throw std::runtime_error("normalize_rows: all-zero row at index " +
                               std::to_string(r));
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::int64_t k = ds.row_offsets[r]; k < ds.row_offsets[r + 1]; ++k) {
      out.values[k] = ds.values[k] * inv;
    }
  }
  return out;
}

std::vector<std::vector<int>> partition_data(const SparseDataset& ds,
                                             int n_workers,
                                             std::uint64_t seed) {
  if (n_workers < 1) throw std::invalid_argument("partition_data: n_workers must be >= 1");
  if (n_workers > ds.n_rows) {
    throw std::invalid_argument("partition_data: more workers than rows");
  }
  std::vector<int> perm(ds.n_rows);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = Rng::stream(seed, 0, 0, StreamKind::shard);
  for (int i = ds.n_rows - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::vector<int>> shards(n_workers);
  const int base = ds.n_rows / n_workers;
  const int extra = ds.n_rows % n_workers;
  int pos = 0;
  for (int w = 0; w < n_workers; ++w) {
    const int sz = base + (w < extra ? 1 : 0);
    shards[w].assign(perm.begin() + pos, perm.begin() + pos + sz);
    std::sort(shards[w].begin(), shards[w].end());
    pos += sz;
  }
  return shards;
}

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("bad numeric field: '" + s + "'");
  }
  return v;
}

static const char* kTraceHeader =
    "round,subopt,dist_sq,grad_sq,lyapunov,blocks_up,blocks_down";

void write_trace_csv(const Trace& trace, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace.records) {
    out << r.round << ',' << format_double(r.subopt) << ','
        << format_double(r.dist_sq) << ',' << format_double(r.grad_sq) << ',';
    if (r.lyapunov) out << format_double(*r.lyapunov);
    out << ',' << r.blocks_up << ',' << r.blocks_down << '\n';
  }
}

void write_trace_csv(const Trace& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write trace file: " + path);
  write_trace_csv(trace, f);
}

Trace read_trace_csv(std::istream& in) {
  Trace trace;
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw std::runtime_error("trace CSV: bad or missing header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        cells.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (cells.size() != 7) {
      throw std::runtime_error("trace CSV: expected 7 cells, got " +
                               std::to_string(cells.size()));
    }
    TraceRecord r;
    r.round = static_cast<std::int64_t>(parse_double(cells[0]));
    r.subopt = parse_double(cells[1]);
    r.dist_sq = parse_double(cells[2]);
    r.grad_sq = parse_double(cells[3]);
    if (!cells[4].empty()) r.lyapunov = parse_double(cells[4]);
    r.blocks_up = static_cast<std::int64_t>(parse_double(cells[5]));
    r.blocks_down = static_cast<std::int64_t>(parse_double(cells[6]));
    trace.records.push_back(r);
  }
  if (!trace.records.empty()) trace.rounds = trace.records.back().round;
  return trace;
}

Trace read_trace_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open trace file: " + path);
  return read_trace_csv(f);
}

bool KeyValueConfig::has(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return true;
  }
  return false;
}

const std::string& KeyValueConfig::get(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return v;
  }
  throw std::runtime_error("missing required key: " + key);
}

std::string KeyValueConfig::get_or(const std::string& key,
                                   const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries.emplace_back(key, value);
}

static std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

KeyValueConfig parse_key_value(std::istream& in) {
  KeyValueConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": empty key");
    }
    if (cfg.has(key)) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": duplicate key '" + key + "'");
    }
    cfg.entries.emplace_back(key, value);
  }
  return cfg;
}

KeyValueConfig load_key_value(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  return parse_key_value(f);
}

void write_key_value(const KeyValueConfig& cfg, std::ostream& out) {
  for (const auto& [k, v] : cfg.entries) out << k << " = " << v << '\n';
}

}  // namespace ibopt

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "ibopt/data_io.hpp"
#include "test_helpers.hpp"

using namespace ibopt;

TEST_CASE("libsvm parsing: labels, indices, comments") {
  std::istringstream in(
      "+1 1:0.5 3:-2\n"
      "0 2:1\n"
      "# full comment line\n"
      "-1 1:1 2:0.25  # trailing comment\n");
  const SparseDataset ds = parse_libsvm(in);
  CHECK(ds.n_rows == 3);
  CHECK(ds.d == 3);
  CHECK(ds.labels[0] == 1.0);
  CHECK(ds.labels[1] == -1.0);  // 0 remapped
  CHECK(ds.labels[2] == -1.0);
  CHECK(ds.row_nnz(0) == 2);
  CHECK(ds.col_index[0] == 0);
  CHECK(ds.values[0] == 0.5);
  CHECK(ds.col_index[1] == 2);
  CHECK(ds.values[1] == -2.0);
}

TEST_CASE("libsvm parse errors carry line numbers") {
  auto expect_error = [](const std::string& text, const std::string& what) {
    std::istringstream in(text);
    try {
      parse_libsvm(in);
      FAIL("expected parse error for: " << text);
    } catch (const std::runtime_error& e) {
      const std::string msg = e.what();
      CHECK(msg.find(what) != std::string::npos);
      CHECK(msg.find("line") != std::string::npos);
    }
  };
  expect_error("+1 1:0.5\n+2 1:1\n", "label");
  expect_error("+1 1:0.5 bad\n", "malformed token");
  expect_error("+1 3:1 2:1\n", "non-monotone");
  expect_error("+1 2:1 2:1\n", "duplicate");
  expect_error("+1 0:1\n", "bad feature index");

  std::istringstream empty("");
  CHECK_THROWS_WITH_AS(parse_libsvm(empty), doctest::Contains("empty"),
                       std::runtime_error);
}

TEST_CASE("d override widens but cannot shrink") {
  std::istringstream in("+1 2:1\n");
  const SparseDataset ds = parse_libsvm(in, 10);
  CHECK(ds.d == 10);
  std::istringstream in2("+1 5:1\n");
  CHECK_THROWS_AS(parse_libsvm(in2, 3), std::runtime_error);
}

TEST_CASE("row normalization") {
  SparseDataset ds;
  ds.n_rows = 2;
  ds.d = 2;
  ds.row_offsets = {0, 2, 3};
  ds.col_index = {0, 1, 0};
  ds.values = {3.0, 4.0, 1.0};
  ds.labels = {1.0, -1.0};
  const SparseDataset nd = normalize_rows(ds);
  CHECK(nd.values[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(nd.values[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(nd.values[2] == 1.0);  // already unit, bit-identical

  SparseDataset zero = ds;
  zero.values = {0.0, 0.0, 1.0};
  CHECK_THROWS_WITH_AS(normalize_rows(zero), doctest::Contains("index 0"),
                       std::runtime_error);
}

TEST_CASE("normalization audit over the shipped dataset") {
  const SparseDataset ds =
      load_libsvm(test_helpers::data_dir() + "/a1a_like.libsvm");
  CHECK(ds.n_rows == 1600);
  CHECK(ds.d == 123);
  for (int r = 0; r < ds.n_rows; ++r) {
    double sq = 0;
    for (std::int64_t k = ds.row_offsets[r]; k < ds.row_offsets[r + 1]; ++k) {
      sq += ds.values[k] * ds.values[k];
    }
    REQUIRE(std::abs(std::sqrt(sq) - 1.0) <= 1e-12);
  }
}

TEST_CASE("parse -> serialize -> parse is a fixpoint") {
  const SparseDataset ds =
      load_libsvm(test_helpers::data_dir() + "/a1a_like.libsvm");
  std::ostringstream out;
  serialize_libsvm(ds, out);
  std::istringstream back(out.str());
  const SparseDataset ds2 = parse_libsvm(back);
  REQUIRE(ds2.n_rows == ds.n_rows);
  REQUIRE(ds2.d == ds.d);
  CHECK(ds2.labels == ds.labels);
  CHECK(ds2.col_index == ds.col_index);
  CHECK(ds2.values == ds.values);  // bit-exact via shortest representation
}

TEST_CASE("sharding is a balanced partition") {
  SparseDataset ds;
  ds.n_rows = 10;
  ds.d = 1;
  ds.row_offsets.assign(11, 0);
  ds.labels.assign(10, 1.0);
  const auto shards = partition_data(ds, 3, 5);
  REQUIRE(shards.size() == 3);
  CHECK(shards[0].size() == 4);
  CHECK(shards[1].size() == 3);
  CHECK(shards[2].size() == 3);

  const auto single = partition_data(ds, 1, 5);
  CHECK(single[0].size() == 10);

  SparseDataset big;
  big.n_rows = 8124;
  big.d = 1;
  big.row_offsets.assign(8125, 0);
  big.labels.assign(8124, 1.0);
  const auto sh = partition_data(big, 20, 9);
  std::set<int> seen;
  std::size_t total = 0;
  std::size_t lo = big.n_rows, hi = 0;
  for (const auto& s : sh) {
    total += s.size();
    lo = std::min(lo, s.size());
    hi = std::max(hi, s.size());
    for (int r : s) CHECK(seen.insert(r).second);
  }
  CHECK(total == 8124);
  CHECK(seen.size() == 8124);
  CHECK(hi - lo <= 1);

  CHECK_THROWS_AS(partition_data(ds, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(partition_data(ds, 11, 1), std::invalid_argument);
}

TEST_CASE("trace CSV round-trips bit-exactly") {
  Trace t;
  t.method = "ibcd";
  t.n_workers = 2;
  t.m_blocks = 4;
  t.rounds = 2;
  TraceRecord r0;
  r0.round = 0;
  r0.subopt = 0.1234567890123456789;
  r0.dist_sq = 3.0e-17;
  r0.grad_sq = 1.0 / 3.0;
  TraceRecord r1 = r0;
  r1.round = 2;
  r1.lyapunov = 2.5000000000000004;
  r1.blocks_up = 4;
  r1.blocks_down = 8;
  t.records = {r0, r1};

  std::ostringstream out;
  write_trace_csv(t, out);
  CHECK(out.str().rfind("round,subopt,dist_sq,grad_sq,lyapunov,blocks_up,"
                        "blocks_down\n", 0) == 0);
  std::istringstream in(out.str());
  const Trace back = read_trace_csv(in);
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[0].subopt == r0.subopt);
  CHECK(back.records[0].dist_sq == r0.dist_sq);
  CHECK(back.records[0].grad_sq == r0.grad_sq);
  CHECK_FALSE(back.records[0].lyapunov.has_value());
  CHECK(back.records[1].lyapunov.value() == r1.lyapunov.value());
  CHECK(back.records[1].blocks_up == 4);

  std::istringstream bad("wrong,header\n");
  CHECK_THROWS_AS(read_trace_csv(bad), std::runtime_error);
}

TEST_CASE("key-value config parsing") {
  std::istringstream in(
      "# a comment\n"
      "method = ibcd\n"
      "tau=0.25\n"
      "\n"
      "gamma = auto # inline comment\n");
  const KeyValueConfig cfg = parse_key_value(in);
  CHECK(cfg.get("method") == "ibcd");
  CHECK(cfg.get("tau") == "0.25");
  CHECK(cfg.get("gamma") == "auto");
  CHECK_THROWS_WITH_AS(cfg.get("rounds"), doctest::Contains("missing required key"),
                       std::runtime_error);

  std::istringstream dup("a = 1\na = 2\n");
  CHECK_THROWS_WITH_AS(parse_key_value(dup), doctest::Contains("duplicate"),
                       std::runtime_error);
  std::istringstream noeq("justtext\n");
  CHECK_THROWS_AS(parse_key_value(noeq), std::runtime_error);
}

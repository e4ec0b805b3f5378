#pragma once

#include <cstdlib>
#include <string>

#include "ibopt/problems.hpp"
#include "ibopt/rng.hpp"

namespace test_helpers {

inline ibopt::Vector random_point(int d, std::uint64_t seed, double scale = 1.0) {
  ibopt::Rng rng(seed);
  ibopt::Vector x(d);
  for (int i = 0; i < d; ++i) x[i] = scale * rng.normal();
  return x;
}

inline std::string data_dir() {
  const char* env = std::getenv("IBOPT_DATA_DIR");
  return env ? env : "data";
}

inline std::string config_dir() {
  const char* env = std::getenv("IBOPT_CONFIG_DIR");
  return env ? env : "configs";
}

}  // namespace test_helpers

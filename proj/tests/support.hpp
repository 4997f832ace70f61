#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "kdbrain/tensor.hpp"

namespace testing {

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("kdbrain_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline kdbrain::Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  kdbrain::Tensor t(r, c);
  for (double& v : t.data()) v = n(rng);
  return t;
}

inline kdbrain::Tensor random_stochastic(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  kdbrain::Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += t(i, j) = u(rng);
    for (std::size_t j = 0; j < n; ++j) t(i, j) /= s;
  }
  return t;
}

}  // namespace testing

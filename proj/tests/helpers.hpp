#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "privet/data.hpp"
#include "privet/experiments.hpp"
#include "privet/rng.hpp"

namespace testing_util {

inline privet::DataMatrix random_binary(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                        double p_one = 0.5) {
  privet::Xoshiro256 rng(seed);
  std::vector<std::uint8_t> bits(rows * cols);
  for (auto& b : bits) b = rng.uniform() < p_one ? 1 : 0;
  return privet::DataMatrix::from_bits(rows, cols, bits);
}

inline privet::DataMatrix random_float(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  return privet::generate_gaussian(rows, cols, seed);
}

// Population used by the statistical tests (generator defaults).
inline privet::PopulationSpec fixture_population(std::size_t rows, std::size_t cols = 4096) {
  privet::PopulationSpec s;
  s.n_rows = rows;
  s.n_cols = cols;
  return s;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("privet_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace testing_util

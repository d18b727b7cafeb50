#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "txp/core.hpp"

namespace txp::test {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("txp-test-" + std::to_string(rd()) + std::to_string(rd()));
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

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// NIT, SXT cheap; CIP, LVX costly.
inline ActionSet uti_actions() {
  return ActionSet({{"NIT", 0.0}, {"SXT", 0.0}, {"CIP", 1.0}, {"LVX", 1.0}});
}

// Cohort from explicit rows; doctor indices optional.
inline Cohort make_cohort(const std::vector<std::vector<double>>& x,
                          const std::vector<std::vector<int>>& y,
                          std::vector<std::size_t> doctor = {}) {
  Cohort c;
  for (std::size_t i = 0; i < x.size(); ++i) {
    c.ids.push_back("r" + std::to_string(i));
    c.X.append_row(x[i]);
    std::vector<std::uint8_t> row(y[i].begin(), y[i].end());
    c.Y.append_row(row);
  }
  if (!x.empty()) {
    for (std::size_t j = 0; j < x[0].size(); ++j) c.feature_names.push_back("f" + std::to_string(j));
  }
  if (!doctor.empty()) c.doctor_action = std::move(doctor);
  return c;
}

inline MatrixD random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                             double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixD m(rows, cols);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

}  // namespace txp::test

#pragma once

#include <Eigen/Core>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <thread>

#include "e2v/random.hpp"

namespace e2v::test {

inline std::filesystem::path data_dir() { return E2V_DATA_DIR; }
inline std::filesystem::path fixture_dir() { return data_dir() / "fixture"; }

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("e2v-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return rng.normal(); });
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  return Eigen::VectorXd::NullaryExpr(n, [&] { return rng.normal(); });
}

// Relative error used by the gradient checks.
inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

inline double max_rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({1e-8, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace e2v::test

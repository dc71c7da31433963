#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include <unistd.h>

#include "neuralwarp/series.hpp"

namespace nwtest {

inline neuralwarp::TimeSeries random_series(std::size_t length, std::size_t channels,
                                            neuralwarp::Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  neuralwarp::Matrix m(length, channels);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return neuralwarp::TimeSeries(m);
}

inline neuralwarp::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, neuralwarp::Rng& rng,
                                        double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  neuralwarp::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Central-difference oracle, kept separate from the library's checker:
// max over components of |a - n| / max(1e-8, |a| + |n|).
inline double max_relative_error(const std::function<double()>& loss, neuralwarp::Matrix& param,
                                 const neuralwarp::Matrix& analytic, double eps = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < param.size(); ++k) {
    const double saved = param.data()[k];
    param.data()[k] = saved + eps;
    const double up = loss();
    param.data()[k] = saved - eps;
    const double down = loss();
    param.data()[k] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic.data()[k];
    worst = std::max(worst, std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric)));
  }
  return worst;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("nwtest_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

}  // namespace nwtest

#include "neuralwarp/elastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace neuralwarp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_channels(const TimeSeries& a, const TimeSeries& b) {
  if (a.channels() != b.channels()) {
    throw std::invalid_argument("channel mismatch: " + std::to_string(a.channels()) + " vs " +
                                std::to_string(b.channels()));
  }
}

void check_band(std::size_t ta, std::size_t tb, std::optional<std::size_t> band) {
  if (band) {
    const std::size_t gap = ta > tb ? ta - tb : tb - ta;
    if (*band < gap) {
      throw std::invalid_argument("band " + std::to_string(*band) +
                                  " cannot reach the end cell for lengths " + std::to_string(ta) +
                                  " and " + std::to_string(tb));
    }
  }
}

bool outside_band(std::size_t i, std::size_t j, std::optional<std::size_t> band) {
  if (!band) return false;
  return (i > j ? i - j : j - i) > *band;
}

double l1_rows(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).cwiseAbs().sum();
}

}  // namespace

bool WarpingPath::is_valid(std::size_t ta, std::size_t tb) const {
  if (pairs.empty()) return false;
  if (pairs.front() != std::pair<std::size_t, std::size_t>{1, 1}) return false;
  if (pairs.back() != std::pair<std::size_t, std::size_t>{ta, tb}) return false;
  for (std::size_t k = 1; k < pairs.size(); ++k) {
    const auto [pi, pj] = pairs[k - 1];
    const auto [ci, cj] = pairs[k];
    if (ci < pi || cj < pj) return false;
    const std::size_t di = ci - pi;
    const std::size_t dj = cj - pj;
    if (di > 1 || dj > 1 || (di == 0 && dj == 0)) return false;
  }
  return true;
}

double squared_local_cost(const TimeSeries& a, std::size_t i, const TimeSeries& b, std::size_t j) {
  return (a.at(i) - b.at(j)).squaredNorm();
}

DtwResult dtw(const TimeSeries& a, const TimeSeries& b, std::optional<std::size_t> band) {
  require_same_channels(a, b);
  const std::size_t ta = a.length();
  const std::size_t tb = b.length();
  check_band(ta, tb, band);

  Matrix c = Matrix::Constant(static_cast<Eigen::Index>(ta), static_cast<Eigen::Index>(tb), kInf);
  for (std::size_t i = 0; i < ta; ++i) {
    for (std::size_t j = 0; j < tb; ++j) {
      if (outside_band(i, j, band)) continue;
      const double local = squared_local_cost(a, i, b, j);
      double best;
      if (i == 0 && j == 0) {
        c(0, 0) = local;
        continue;
      } else if (i == 0) {
        best = c(0, static_cast<Eigen::Index>(j - 1));
      } else if (j == 0) {
        best = c(static_cast<Eigen::Index>(i - 1), 0);
      } else {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto jj = static_cast<Eigen::Index>(j);
        best = std::min({c(ii - 1, jj - 1), c(ii, jj - 1), c(ii - 1, jj)});
      }
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = local + best;
    }
  }
  DtwResult result;
  result.distance = c(static_cast<Eigen::Index>(ta - 1), static_cast<Eigen::Index>(tb - 1));
  result.matrix.cost = std::move(c);
  return result;
}

double dtw_distance(const TimeSeries& a, const TimeSeries& b, std::optional<std::size_t> band) {
  require_same_channels(a, b);
  const std::size_t ta = a.length();
  const std::size_t tb = b.length();
  check_band(ta, tb, band);

  std::vector<double> prev(tb, kInf);
  std::vector<double> cur(tb, kInf);
  for (std::size_t i = 0; i < ta; ++i) {
    std::fill(cur.begin(), cur.end(), kInf);
    for (std::size_t j = 0; j < tb; ++j) {
      if (outside_band(i, j, band)) continue;
      const double local = squared_local_cost(a, i, b, j);
      if (i == 0 && j == 0) {
        cur[0] = local;
      } else if (i == 0) {
        cur[j] = local + cur[j - 1];
      } else if (j == 0) {
        cur[j] = local + prev[0];
      } else {
        cur[j] = local + std::min({prev[j - 1], cur[j - 1], prev[j]});
      }
    }
    std::swap(prev, cur);
  }
  return prev[tb - 1];
}

WarpingPath dtw_path(const WarpingMatrix& matrix) {
  const Matrix& c = matrix.cost;
  Eigen::Index i = c.rows() - 1;
  Eigen::Index j = c.cols() - 1;
  WarpingPath path;
  path.pairs.emplace_back(static_cast<std::size_t>(i + 1), static_cast<std::size_t>(j + 1));
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = c(i - 1, j - 1);
      const double left = c(i, j - 1);
      const double up = c(i - 1, j);
      if (diag <= left && diag <= up) {
        --i;
        --j;
      } else if (left <= up) {
        --j;
      } else {
        --i;
      }
    }
    path.pairs.emplace_back(static_cast<std::size_t>(i + 1), static_cast<std::size_t>(j + 1));
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

double dtw_via_indicator(const TimeSeries& a, const TimeSeries& b, const WarpingPath& path) {
  require_same_channels(a, b);
  if (!path.is_valid(a.length(), b.length())) {
    throw std::invalid_argument("path violates the warping step constraint");
  }
  // Path pairs are strictly increasing in row-major order, so a single cursor
  // answers the indicator while scanning the full grid.
  std::size_t cursor = 0;
  double total = 0.0;
  for (std::size_t i = 1; i <= a.length(); ++i) {
    for (std::size_t j = 1; j <= b.length(); ++j) {
      double indicator = 0.0;
      if (cursor < path.pairs.size() && path.pairs[cursor] == std::pair{i, j}) {
        indicator = 1.0;
        ++cursor;
      }
      total += squared_local_cost(a, i - 1, b, j - 1) * indicator;
    }
  }
  return total;
}

double twed(const TimeSeries& a, const TimeSeries& b, double stiffness, double penalty) {
  require_same_channels(a, b);
  if (!(stiffness >= 0.0) || !(penalty >= 0.0)) {
    throw std::invalid_argument("TWED stiffness and penalty must be non-negative");
  }
  const auto ta = static_cast<Eigen::Index>(a.length());
  const auto tb = static_cast<Eigen::Index>(b.length());
  const auto dims = static_cast<Eigen::Index>(a.channels());

  // Index 0 is the zero-vector prefix; timestamps are the indices themselves.
  Matrix pa = Matrix::Zero(ta + 1, dims);
  Matrix pb = Matrix::Zero(tb + 1, dims);
  pa.bottomRows(ta) = a.values();
  pb.bottomRows(tb) = b.values();

  Matrix d = Matrix::Constant(ta + 1, tb + 1, kInf);
  d(0, 0) = 0.0;
  for (Eigen::Index i = 1; i <= ta; ++i) {
    for (Eigen::Index j = 1; j <= tb; ++j) {
      const double del_a = d(i - 1, j) + l1_rows(pa, i, pa, i - 1) + stiffness + penalty;
      const double del_b = d(i, j - 1) + l1_rows(pb, j, pb, j - 1) + stiffness + penalty;
      const double gap = static_cast<double>(std::abs(i - j));
      const double match = d(i - 1, j - 1) + l1_rows(pa, i, pb, j) + l1_rows(pa, i - 1, pb, j - 1) +
                           stiffness * (gap + gap);
      d(i, j) = std::min({del_a, del_b, match});
    }
  }
  return d(ta, tb);
}

double euclidean(const TimeSeries& a, const TimeSeries& b) {
  if (a.length() != b.length() || a.channels() != b.channels()) {
    throw std::invalid_argument("euclidean distance needs equal shapes");
  }
  return (a.values() - b.values()).norm();
}

}  // namespace neuralwarp

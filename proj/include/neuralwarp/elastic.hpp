#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "neuralwarp/series.hpp"

namespace neuralwarp {

/// Ordered (i, j) alignment pairs, 1-based, from (1, 1) to (T_A, T_B) with
/// steps (0,1), (1,0) or (1,1).
struct WarpingPath {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  /// True if endpoints and every step obey the DTW step set for lengths (ta, tb).
  bool is_valid(std::size_t ta, std::size_t tb) const;
};

/// Cumulative optimal costs; cell (i-1, j-1) holds C[i, j]. Cells outside a
/// Sakoe-Chiba band are +inf.
struct WarpingMatrix {
  Matrix cost;
};

struct DtwResult {
  double distance = 0.0;
  WarpingMatrix matrix;
};

/// Squared Euclidean distance between row i of a and row j of b (0-based).
double squared_local_cost(const TimeSeries& a, std::size_t i, const TimeSeries& b, std::size_t j);

/// Exact DTW with squared-Euclidean local cost and no final square root.
/// band, if given, restricts cells to |i - j| <= band.
DtwResult dtw(const TimeSeries& a, const TimeSeries& b, std::optional<std::size_t> band = std::nullopt);

/// Distance only, O(T_B) memory.
double dtw_distance(const TimeSeries& a, const TimeSeries& b,
                    std::optional<std::size_t> band = std::nullopt);

/// Backtrace from (T_A, T_B); ties prefer diagonal, then left (j-1), then up (i-1).
WarpingPath dtw_path(const WarpingMatrix& matrix);

/// Sum over all (i, j) of the local cost times the path indicator.
/// Throws std::invalid_argument if the path is not a valid warping path for (a, b).
double dtw_via_indicator(const TimeSeries& a, const TimeSeries& b, const WarpingPath& path);

/// Time Warp Edit Distance with L1 local cost and unit timestamps.
double twed(const TimeSeries& a, const TimeSeries& b, double stiffness = 0.001, double penalty = 1.0);

/// Lock-step Euclidean distance; requires equal shapes.
double euclidean(const TimeSeries& a, const TimeSeries& b);

}  // namespace neuralwarp

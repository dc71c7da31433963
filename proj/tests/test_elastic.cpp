#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <limits>

#include "neuralwarp/elastic.hpp"
#include "support.hpp"

using namespace neuralwarp;

namespace {

double local(const TimeSeries& a, std::size_t i, const TimeSeries& b, std::size_t j) {
  return (a.values().row(static_cast<Eigen::Index>(i)) - b.values().row(static_cast<Eigen::Index>(j)))
      .squaredNorm();
}

// Exhaustive minimum over every monotone path from (0,0) to (Ta-1,Tb-1).
// Costs are summed in path order, as the recursion does.
double brute_force_dtw(const TimeSeries& a, const TimeSeries& b) {
  const std::size_t ta = a.length();
  const std::size_t tb = b.length();
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    acc += local(a, i, b, j);
    if (i + 1 == ta && j + 1 == tb) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < ta && j + 1 < tb) walk(i + 1, j + 1, acc);
    if (j + 1 < tb) walk(i, j + 1, acc);
    if (i + 1 < ta) walk(i + 1, j, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

double path_cost(const TimeSeries& a, const TimeSeries& b, const WarpingPath& path) {
  double sum = 0.0;
  for (const auto& [i, j] : path.pairs) sum += local(a, i - 1, b, j - 1);
  return sum;
}

}  // namespace

TEST(Dtw, SelfDistanceIsZero) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const TimeSeries a = nwtest::random_series(1 + t, 2, rng);
    EXPECT_EQ(dtw_distance(a, a), 0.0);
  }
}

TEST(Dtw, WorkedExample) {
  const TimeSeries a = TimeSeries::univariate({0, 1, 2});
  const TimeSeries b = TimeSeries::univariate({0, 2});
  EXPECT_EQ(brute_force_dtw(a, b), 1.0);
  EXPECT_EQ(dtw_distance(a, b), 1.0);
  const DtwResult r = dtw(a, b);
  EXPECT_EQ(path_cost(a, b, dtw_path(r.matrix)), 1.0);
}

TEST(Dtw, SingleCell) {
  EXPECT_EQ(dtw_distance(TimeSeries::univariate({1}), TimeSeries::univariate({3})), 4.0);
}

TEST(Dtw, MatchesBruteForce) {
  Rng rng(2024);
  std::uniform_int_distribution<int> len(1, 6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = trial % 2 == 0 ? 1 : 3;
    const TimeSeries a = nwtest::random_series(len(rng), d, rng);
    const TimeSeries b = nwtest::random_series(len(rng), d, rng);
    EXPECT_EQ(dtw_distance(a, b), brute_force_dtw(a, b)) << "trial " << trial;
  }
}

TEST(Dtw, ChannelMismatchThrows) {
  Rng rng(0);
  EXPECT_THROW(dtw(nwtest::random_series(3, 1, rng), nwtest::random_series(3, 2, rng)),
               std::invalid_argument);
}

TEST(Dtw, SymmetricAndNonNegative) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const TimeSeries a = nwtest::random_series(3 + trial % 10, 2, rng);
    const TimeSeries b = nwtest::random_series(4 + trial % 7, 2, rng);
    const double ab = dtw_distance(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(ab, dtw_distance(b, a), 1e-9);
  }
}

TEST(Dtw, WarpingMatrixInvariants) {
  Rng rng(4);
  const TimeSeries a = nwtest::random_series(7, 2, rng);
  const TimeSeries b = nwtest::random_series(5, 2, rng);
  const Matrix& c = dtw(a, b).matrix.cost;
  EXPECT_EQ(c(0, 0), local(a, 0, b, 0));
  EXPECT_TRUE(c.allFinite());
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      if (i == 0 && j == 0) continue;
      double prev = std::numeric_limits<double>::infinity();
      if (i > 0 && j > 0) prev = std::min(prev, c(i - 1, j - 1));
      if (i > 0) prev = std::min(prev, c(i - 1, j));
      if (j > 0) prev = std::min(prev, c(i, j - 1));
      EXPECT_EQ(c(i, j), prev + local(a, i, b, j));
    }
  }
}

TEST(Dtw, BandMatchesFullWhenWide) {
  Rng rng(5);
  const TimeSeries a = nwtest::random_series(10, 1, rng);
  const TimeSeries b = nwtest::random_series(10, 1, rng);
  EXPECT_EQ(dtw_distance(a, b, 9), dtw_distance(a, b));
  EXPECT_GE(dtw_distance(a, b, 1), dtw_distance(a, b));
  EXPECT_NEAR(dtw_distance(a, b, 0), euclidean(a, b) * euclidean(a, b), 1e-12);
}

TEST(DtwPath, DiagonalForSelfAlignment) {
  Rng rng(6);
  const TimeSeries a = nwtest::random_series(9, 1, rng);
  const WarpingPath p = dtw_path(dtw(a, a).matrix);
  ASSERT_EQ(p.pairs.size(), 9u);
  for (std::size_t k = 0; k < 9; ++k) EXPECT_EQ(p.pairs[k], std::make_pair(k + 1, k + 1));
}

TEST(DtwPath, TieBreakPrefersDiagonal) {
  // All-zero local costs: every predecessor ties, so the path takes the
  // diagonal first and then moves left toward (1,1).
  const TimeSeries a = TimeSeries::univariate({0, 0});
  const TimeSeries b = TimeSeries::univariate({0, 0, 0, 0});
  const WarpingPath p = dtw_path(dtw(a, b).matrix);
  const std::vector<std::pair<std::size_t, std::size_t>> expected{{1, 1}, {1, 2}, {1, 3}, {2, 4}};
  EXPECT_EQ(p.pairs, expected);
  EXPECT_EQ(dtw_path(dtw(a, b).matrix).pairs, p.pairs);
}

TEST(DtwPath, ValidAndCostConsistent) {
  Rng rng(7);
  std::uniform_int_distribution<int> len(1, 20);
  for (int trial = 0; trial < 100; ++trial) {
    const TimeSeries a = nwtest::random_series(len(rng), 2, rng);
    const TimeSeries b = nwtest::random_series(len(rng), 2, rng);
    const DtwResult r = dtw(a, b);
    const WarpingPath p = dtw_path(r.matrix);
    ASSERT_TRUE(p.is_valid(a.length(), b.length()));
    EXPECT_EQ(p.pairs.front(), (std::pair<std::size_t, std::size_t>(1, 1)));
    EXPECT_EQ(p.pairs.back(), std::make_pair(a.length(), b.length()));
    EXPECT_NEAR(path_cost(a, b, p), r.distance, 1e-9);
  }
}

TEST(DtwViaIndicator, EqualsDpOnOptimalPath) {
  Rng rng(8);
  std::uniform_int_distribution<int> len(1, 32);
  for (int trial = 0; trial < 100; ++trial) {
    const TimeSeries a = nwtest::random_series(len(rng), 1 + trial % 3, rng);
    const TimeSeries b = nwtest::random_series(len(rng), 1 + trial % 3, rng);
    const DtwResult r = dtw(a, b);
    EXPECT_NEAR(dtw_via_indicator(a, b, dtw_path(r.matrix)), r.distance, 1e-9);
  }
}

TEST(DtwViaIndicator, SuboptimalPathCostsAtLeastDp) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const TimeSeries a = nwtest::random_series(6, 1, rng);
    const TimeSeries b = nwtest::random_series(6, 1, rng);
    // Valid but generally suboptimal: all the way right, then all the way down.
    WarpingPath p;
    for (std::size_t j = 1; j <= 6; ++j) p.pairs.emplace_back(1, j);
    for (std::size_t i = 2; i <= 6; ++i) p.pairs.emplace_back(i, 6);
    EXPECT_GE(dtw_via_indicator(a, b, p), dtw_distance(a, b));
    EXPECT_GE(dtw_via_indicator(a, b, p), local(a, 0, b, 0));
  }
}

TEST(DtwViaIndicator, RejectsInvalidStep) {
  const TimeSeries a = TimeSeries::univariate({0, 1, 2});
  WarpingPath p;
  p.pairs = {{1, 1}, {3, 3}};
  EXPECT_FALSE(p.is_valid(3, 3));
  EXPECT_THROW(dtw_via_indicator(a, a, p), std::invalid_argument);
}

TEST(Twed, IdentityIsZero) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const TimeSeries a = nwtest::random_series(1 + trial, 2, rng);
    EXPECT_EQ(twed(a, a, 0.5 * trial, 0.1 * trial), 0.0);
  }
}

TEST(Twed, HandComputedTwoSamples) {
  // A=[1], B=[3], zero prefix: match costs |1-3| + |0-0| = 2, delete paths
  // cost at least 2 * (nu + lambda) + |1| + |3| = 6.002.
  EXPECT_DOUBLE_EQ(twed(TimeSeries::univariate({1}), TimeSeries::univariate({3})), 2.0);
}

TEST(Twed, SymmetricNonNegative) {
  Rng rng(11);
  std::uniform_int_distribution<int> len(1, 15);
  for (int trial = 0; trial < 100; ++trial) {
    const TimeSeries a = nwtest::random_series(len(rng), 1 + trial % 2, rng);
    const TimeSeries b = nwtest::random_series(len(rng), 1 + trial % 2, rng);
    const double ab = twed(a, b, 0.001, 1.0);
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(ab, twed(b, a, 0.001, 1.0), 1e-9);
  }
}

TEST(Twed, TriangleInequality) {
  Rng rng(12);
  std::uniform_int_distribution<int> len(1, 12);
  for (int trial = 0; trial < 200; ++trial) {
    const TimeSeries a = nwtest::random_series(len(rng), 1, rng);
    const TimeSeries b = nwtest::random_series(len(rng), 1, rng);
    const TimeSeries c = nwtest::random_series(len(rng), 1, rng);
    EXPECT_LE(twed(a, c), twed(a, b) + twed(b, c) + 1e-9) << "trial " << trial;
  }
}

TEST(Twed, NegativeParametersRejected) {
  const TimeSeries a = TimeSeries::univariate({0, 1});
  EXPECT_THROW(twed(a, a, -1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(twed(a, a, 1.0, -1.0), std::invalid_argument);
}

TEST(Euclidean, LockStep) {
  EXPECT_DOUBLE_EQ(euclidean(TimeSeries::univariate({0, 0}), TimeSeries::univariate({3, 4})), 5.0);
}

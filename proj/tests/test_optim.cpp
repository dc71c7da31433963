#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "neuralwarp/errors.hpp"
#include "neuralwarp/nn/checkpoint.hpp"
#include "neuralwarp/nn/gradcheck.hpp"
#include "neuralwarp/nn/layers.hpp"
#include "neuralwarp/nn/optim.hpp"
#include "support.hpp"

using namespace neuralwarp;
using namespace neuralwarp::nn;

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  ParamStore store;
  Rng rng(0);
  const std::size_t w = store.add("w", nwtest::random_matrix(3, 2, rng));
  const Matrix before = store.value(w);
  for (int i = 0; i < 10; ++i) adam_step(store, 1e-3);
  EXPECT_EQ(store.value(w), before);
  EXPECT_EQ(store.step, 10);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  ParamStore store;
  const std::size_t w = store.add("w", Matrix::Zero(1, 1));
  const double lr = 1e-3;
  double last = 0.0;
  for (int i = 0; i < 1000; ++i) {
    store.grad(w).setConstant(0.7);
    const double before = store.value(w)(0, 0);
    adam_step(store, lr);
    last = std::abs(store.value(w)(0, 0) - before);
  }
  EXPECT_NEAR(last, lr, 0.05 * lr);
}

TEST(Adam, MinimizesQuadratic) {
  ParamStore store;
  const std::size_t w = store.add("theta", Matrix::Constant(1, 1, 1.0));
  int steps = 0;
  while (std::abs(store.value(w)(0, 0)) >= 1e-2 && steps < 2000) {
    store.grad(w)(0, 0) = 2.0 * store.value(w)(0, 0);
    adam_step(store, 1e-2);
    ++steps;
  }
  EXPECT_LT(std::abs(store.value(w)(0, 0)), 1e-2);
  EXPECT_LE(steps, 2000);
}

TEST(Adam, NonFiniteGradientRejected) {
  ParamStore store;
  const std::size_t w = store.add("w", Matrix::Ones(2, 2));
  store.grad(w)(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(adam_step(store, 1e-3), DivergenceError);
  EXPECT_EQ(store.value(w), Matrix::Ones(2, 2));
  EXPECT_EQ(store.step, 0);
}

TEST(Adam, StateStaysFiniteUnderRandomGradients) {
  ParamStore store;
  Rng rng(1);
  const std::size_t a = store.add("a", nwtest::random_matrix(4, 4, rng));
  const std::size_t b = store.add("b", nwtest::random_matrix(1, 4, rng));
  for (int i = 0; i < 200; ++i) {
    store.grad(a) = nwtest::random_matrix(4, 4, rng, 100.0);
    store.grad(b) = nwtest::random_matrix(1, 4, rng, 1e-6);
    adam_step(store, 1e-2);
    for (const Param& p : store) {
      ASSERT_TRUE(p.value.allFinite());
      ASSERT_TRUE(p.m.allFinite());
      ASSERT_TRUE(p.v.allFinite());
    }
  }
}

TEST(Adam, BuffersAreNotUpdated) {
  ParamStore store;
  const std::size_t buf = store.add("running", Matrix::Ones(1, 2), false);
  store.grad(buf).setConstant(5.0);
  adam_step(store, 1.0);
  EXPECT_EQ(store.value(buf), Matrix::Ones(1, 2));
}

TEST(Clip, ElementWiseBounds) {
  Matrix g(1, 3);
  g << 25.0, -25.0, 3.0;
  const Matrix c = clip_gradients(g);
  EXPECT_EQ(c(0, 0), 10.0);
  EXPECT_EQ(c(0, 1), -10.0);
  EXPECT_EQ(c(0, 2), 3.0);
}

TEST(Clip, InRangeIsBitwiseUnchanged) {
  Rng rng(2);
  const Matrix g = nwtest::random_matrix(5, 5, rng, 2.0);
  ASSERT_LT(g.cwiseAbs().maxCoeff(), 10.0);
  const Matrix c = clip_gradients(g);
  EXPECT_EQ(std::memcmp(c.data(), g.data(), sizeof(double) * 25), 0);
}

TEST(Clip, StoreOverloadClipsTrainableGroups) {
  ParamStore store;
  const std::size_t w = store.add("w", Matrix::Zero(1, 2));
  store.grad(w) << 11.0, -0.5;
  clip_gradients(store, 10.0);
  EXPECT_EQ(store.grad(w)(0, 0), 10.0);
  EXPECT_EQ(store.grad(w)(0, 1), -0.5);
}

TEST(GradCheck, RelativeErrorFormula) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1.0, 3.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-10), 1e-10 / 1e-8);
}

TEST(GradCheck, LinearLayerAtRoundingLevel) {
  ParamStore store;
  Rng rng(3);
  Dense d(store, "d", 4, 3, Activation::Identity, rng);
  const Matrix x = nwtest::random_matrix(5, 4, rng);
  const Matrix w = nwtest::random_matrix(5, 3, rng);
  DenseCache cache;
  d.forward(store, x, &cache);
  store.zero_grad();
  d.backward(store, w, cache);
  const GradCheckReport r = finite_diff_check(
      [&] { return (d.forward(store, x).array() * w.array()).sum(); }, trainable_targets(store));
  EXPECT_EQ(r.checked, 4u * 3u + 3u);
  EXPECT_LT(r.max_relative_error, 1e-9);
}

TEST(GradCheck, CorruptedGradientIsFlagged) {
  ParamStore store;
  Rng rng(4);
  Dense d(store, "d", 4, 3, Activation::Tanh, rng);
  const Matrix x = nwtest::random_matrix(5, 4, rng);
  DenseCache cache;
  d.forward(store, x, &cache);
  store.zero_grad();
  d.backward(store, Matrix::Ones(5, 3), cache);
  store.grad(d.weight())(2, 1) += 0.1;
  const GradCheckReport r =
      finite_diff_check([&] { return d.forward(store, x).sum(); }, trainable_targets(store));
  EXPECT_GT(r.max_relative_error, 1e-2);
  EXPECT_EQ(r.worst, "d.W[2,1]");
}

TEST(GradCheck, KinkCrossingsAreSkippedWhenAsked) {
  Matrix v(1, 1);
  v(0, 0) = 1e-7;  // |v| has no derivative at 0; probes at +-1e-5 straddle it
  const Matrix analytic = Matrix::Constant(1, 1, 1.0);
  auto loss = [&] {
    KinkRecorder::record(v(0, 0));
    return std::abs(v(0, 0));
  };
  const std::vector<GradTarget> targets{{"v", &v, &analytic}};
  const GradCheckReport strict = finite_diff_check(loss, targets);
  EXPECT_GT(strict.max_relative_error, 0.5);
  const GradCheckReport lenient = finite_diff_check(loss, targets, 1e-5, true);
  EXPECT_EQ(lenient.skipped, 1u);
  EXPECT_EQ(lenient.checked, 0u);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  ParamStore store;
  Rng rng(5);
  BiLstm lstm(store, "l", 2, 3, rng);
  BatchNorm bn(store, "bn", 6);
  store[bn.running_var()].value = nwtest::random_matrix(1, 6, rng).cwiseAbs();
  store.step = 1234;

  std::stringstream buf;
  write_checkpoint(buf, store, "{\"k\":1}");
  const Checkpoint ck = read_checkpoint(buf);
  EXPECT_EQ(ck.config, "{\"k\":1}");
  EXPECT_EQ(ck.step, 1234);

  ParamStore fresh;
  Rng other(6);
  BiLstm lstm2(fresh, "l", 2, 3, other);
  BatchNorm bn2(fresh, "bn", 6);
  apply_checkpoint(ck, fresh);
  ASSERT_EQ(fresh.size(), store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    EXPECT_EQ(fresh[i].name, store[i].name);
    EXPECT_EQ(fresh[i].trainable, store[i].trainable);
    ASSERT_EQ(fresh[i].value.size(), store[i].value.size());
    EXPECT_EQ(std::memcmp(fresh[i].value.data(), store[i].value.data(),
                          sizeof(double) * static_cast<std::size_t>(store[i].value.size())),
              0);
  }
  EXPECT_EQ(fresh.step, 1234);

  const nn::SeqBatch x{nwtest::random_matrix(4, 2, rng)};
  const Matrix y1 = bn.forward(store, lstm.forward(store, x, Mode::Eval, nullptr, nullptr), Mode::Eval,
                               nullptr, nullptr)[0];
  const Matrix y2 = bn2.forward(fresh, lstm2.forward(fresh, x, Mode::Eval, nullptr, nullptr), Mode::Eval,
                                nullptr, nullptr)[0];
  EXPECT_EQ(std::memcmp(y1.data(), y2.data(), sizeof(double) * static_cast<std::size_t>(y1.size())), 0);
}

TEST(Checkpoint, RejectsBadMagicAndTruncation) {
  std::stringstream bad("NOTACKPT-and-more-bytes");
  EXPECT_THROW(read_checkpoint(bad), FormatError);

  ParamStore store;
  store.add("w", Matrix::Ones(3, 3));
  std::stringstream buf;
  write_checkpoint(buf, store, "{}");
  const std::string bytes = buf.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(read_checkpoint(truncated), FormatError);
}

TEST(Checkpoint, ShapeMismatchRejected) {
  ParamStore a;
  a.add("w", Matrix::Ones(2, 2));
  std::stringstream buf;
  write_checkpoint(buf, a, "{}");
  const Checkpoint ck = read_checkpoint(buf);
  ParamStore b;
  b.add("w", Matrix::Ones(3, 2));
  EXPECT_ANY_THROW(apply_checkpoint(ck, b));
}

#include <gtest/gtest.h>

#include <memory>

#include "neuralwarp/nn/layers.hpp"
#include "neuralwarp/nn/param_store.hpp"
#include "support.hpp"

using namespace neuralwarp;
using namespace neuralwarp::nn;
using nwtest::max_relative_error;
using nwtest::random_matrix;

namespace {

SeqBatch random_batch(std::size_t n, Eigen::Index t, Eigen::Index f, Rng& rng) {
  SeqBatch b;
  for (std::size_t i = 0; i < n; ++i) b.push_back(random_matrix(t, f, rng));
  return b;
}

// L = sum_b <weights_b, y_b>, so dL/dy_b = weights_b.
double weighted_sum(const SeqBatch& y, const SeqBatch& weights) {
  double total = 0.0;
  for (std::size_t b = 0; b < y.size(); ++b) total += (y[b].array() * weights[b].array()).sum();
  return total;
}

// Checks every parameter group of `store` and the inputs of a sequence layer.
double seq_layer_error(const SeqLayer& layer, ParamStore& store, SeqBatch x, Mode mode, Rng& rng) {
  std::unique_ptr<LayerCache> cache;
  const SeqBatch y0 = layer.forward(store, x, mode, nullptr, &cache);
  SeqBatch weights;
  for (const Matrix& y : y0) weights.push_back(random_matrix(y.rows(), y.cols(), rng));

  store.zero_grad();
  const SeqBatch gx = layer.backward(store, weights, *cache);
  auto loss = [&] { return weighted_sum(layer.forward(store, x, mode, nullptr, nullptr), weights); };

  double worst = 0.0;
  for (auto& p : store) {
    if (!p.trainable) continue;
    const Matrix analytic = p.grad;
    worst = std::max(worst, max_relative_error(loss, p.value, analytic));
  }
  for (std::size_t b = 0; b < x.size(); ++b) worst = std::max(worst, max_relative_error(loss, x[b], gx[b]));
  return worst;
}

}  // namespace

TEST(Activation, ReluDefinition) {
  Matrix z(1, 2);
  z << -1.0, 2.0;
  const Matrix y = activate(Activation::Relu, z);
  EXPECT_EQ(y(0, 0), 0.0);
  EXPECT_EQ(y(0, 1), 2.0);
}

TEST(Dense, IdentityMap) {
  ParamStore store;
  Rng rng(0);
  Dense d(store, "d", 3, 3, Activation::Identity, rng);
  store[d.weight()].value = Matrix::Identity(3, 3);
  store[d.bias()].value.setZero();
  const Matrix x = random_matrix(4, 3, rng);
  EXPECT_EQ(d.forward(store, x), x);
}

TEST(Dense, GradientMatchesFiniteDifferences) {
  for (Activation act : {Activation::Identity, Activation::Sigmoid, Activation::Tanh}) {
    ParamStore store;
    Rng rng(1);
    Dense d(store, "d", 4, 2, act, rng);
    Matrix x = random_matrix(3, 4, rng);
    const Matrix w = random_matrix(3, 2, rng);
    DenseCache cache;
    d.forward(store, x, &cache);
    store.zero_grad();
    const Matrix gx = d.backward(store, w, cache);
    auto loss = [&] { return (d.forward(store, x).array() * w.array()).sum(); };
    const Matrix gw = store[d.weight()].grad;
    const Matrix gb = store[d.bias()].grad;
    EXPECT_LT(max_relative_error(loss, store[d.weight()].value, gw), 1e-6) << activation_name(act);
    EXPECT_LT(max_relative_error(loss, store[d.bias()].value, gb), 1e-6) << activation_name(act);
    EXPECT_LT(max_relative_error(loss, x, gx), 1e-6) << activation_name(act);
  }
}

TEST(Dense, ReluGradientAwayFromKink) {
  ParamStore store;
  Rng rng(2);
  Dense d(store, "d", 4, 2, Activation::Relu, rng);
  store[d.bias()].value << 0.3, -0.2;
  Matrix x = random_matrix(3, 4, rng);
  // keep every pre-activation at least 1e-3 from zero so no probe crosses it
  const Matrix z = x * store[d.weight()].value + store[d.bias()].value.replicate(3, 1);
  ASSERT_GT(z.cwiseAbs().minCoeff(), 1e-3);
  const Matrix w = random_matrix(3, 2, rng);
  DenseCache cache;
  d.forward(store, x, &cache);
  store.zero_grad();
  const Matrix gx = d.backward(store, w, cache);
  auto loss = [&] { return (d.forward(store, x).array() * w.array()).sum(); };
  const Matrix gw = store[d.weight()].grad;
  EXPECT_LT(max_relative_error(loss, store[d.weight()].value, gw), 1e-6);
  EXPECT_LT(max_relative_error(loss, x, gx), 1e-6);
}

TEST(Conv1d, UnitKernelIsIdentity) {
  ParamStore store;
  Rng rng(3);
  Conv1d conv(store, "c", 1, 1, 1, 1, rng);
  store[conv.weight()].value.setConstant(1.0);
  store[conv.bias()].value.setZero();
  const SeqBatch x = random_batch(2, 7, 1, rng);
  const SeqBatch y = conv.forward(store, x, Mode::Eval, nullptr, nullptr);
  EXPECT_EQ(y[0], x[0]);
  EXPECT_EQ(y[1], x[1]);
}

TEST(Conv1d, OutputLengthIsCeilOfLengthOverStride) {
  ParamStore store;
  Rng rng(4);
  Conv1d s2(store, "s2", 1, 2, 5, 2, rng);
  EXPECT_EQ(s2.output_length(10), 5u);
  EXPECT_EQ(s2.output_length(11), 6u);
  for (std::size_t stride : {1u, 2u, 3u}) {
    ParamStore st;
    Conv1d conv(st, "c", 2, 3, 3, stride, rng);
    for (std::size_t t = 1; t <= 64; ++t) {
      const std::size_t expected = (t + stride - 1) / stride;
      EXPECT_EQ(conv.output_length(t), expected);
      const SeqBatch y = conv.forward(st, random_batch(1, static_cast<Eigen::Index>(t), 2, rng), Mode::Eval,
                                      nullptr, nullptr);
      EXPECT_EQ(static_cast<std::size_t>(y[0].rows()), expected) << "T=" << t << " s=" << stride;
    }
  }
}

TEST(Conv1d, GradientMatchesFiniteDifferences) {
  for (std::size_t stride : {1u, 2u}) {
    ParamStore store;
    Rng rng(5);
    Conv1d conv(store, "c", 2, 3, 3, stride, rng);
    store[conv.bias()].value = random_matrix(1, 3, rng);
    EXPECT_LT(seq_layer_error(conv, store, random_batch(2, 8, 2, rng), Mode::Train, rng), 1e-6)
        << "stride " << stride;
  }
}

TEST(Conv1d, WithoutBiasHasNoBiasGroup) {
  ParamStore store;
  Rng rng(6);
  Conv1d conv(store, "c", 2, 3, 3, 1, rng, false);
  EXPECT_FALSE(conv.has_bias());
  EXPECT_FALSE(store.contains("c.b"));
}

TEST(BiLstm, ZeroWeightsGiveZeroOutputs) {
  ParamStore store;
  Rng rng(7);
  BiLstm lstm(store, "l", 3, 4, rng);
  for (auto& p : store) p.value.setZero();
  const SeqBatch y = lstm.forward(store, random_batch(2, 6, 3, rng), Mode::Eval, nullptr, nullptr);
  for (const Matrix& m : y) EXPECT_TRUE((m.array() == 0.0).all());
}

TEST(BiLstm, OutputShapeConcatenatesDirections) {
  ParamStore store;
  Rng rng(8);
  BiLstm lstm(store, "l", 1, 16, rng);
  const SeqBatch y = lstm.forward(store, random_batch(1, 8, 1, rng), Mode::Eval, nullptr, nullptr);
  EXPECT_EQ(y[0].rows(), 8);
  EXPECT_EQ(y[0].cols(), 32);
}

TEST(BiLstm, BpttMatchesFiniteDifferences) {
  ParamStore store;
  Rng rng(9);
  BiLstm lstm(store, "l", 2, 3, rng);
  EXPECT_LT(seq_layer_error(lstm, store, random_batch(2, 5, 2, rng), Mode::Train, rng), 1e-5);
}

TEST(BatchNorm, TrainModeStandardizes) {
  ParamStore store;
  Rng rng(10);
  BatchNorm bn(store, "bn", 3);
  SeqBatch x = random_batch(4, 6, 3, rng);
  for (Matrix& m : x) m = (m.array() * 5.0 + 2.0).matrix();
  const SeqBatch y = bn.forward(store, x, Mode::Train, nullptr, nullptr);
  Matrix all(24, 3);
  for (std::size_t b = 0; b < 4; ++b) all.middleRows(static_cast<Eigen::Index>(6 * b), 6) = y[b];
  for (Eigen::Index f = 0; f < 3; ++f) {
    const double mean = all.col(f).mean();
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR((all.col(f).array() - mean).square().mean(), 1.0, 1e-3);
  }
}

TEST(BatchNorm, EvalAfterSaturatingRunningStatsMatchesTrain) {
  ParamStore store;
  Rng rng(11);
  BatchNorm bn(store, "bn", 2);
  SeqBatch x = random_batch(3, 5, 2, rng);
  for (Matrix& m : x) m = (m.array() * 3.0 - 1.0).matrix();
  SeqBatch train_out;
  for (int i = 0; i < 300; ++i) {
    std::unique_ptr<LayerCache> cache;
    train_out = bn.forward(store, x, Mode::Train, nullptr, &cache);
    bn.commit(store, *cache);
  }
  const SeqBatch eval_out = bn.forward(store, x, Mode::Eval, nullptr, nullptr);
  for (std::size_t b = 0; b < x.size(); ++b) {
    EXPECT_LT((eval_out[b] - train_out[b]).cwiseAbs().maxCoeff(), 1e-3);
  }
}

TEST(BatchNorm, ForwardLeavesRunningStatsUntilCommit) {
  ParamStore store;
  Rng rng(12);
  BatchNorm bn(store, "bn", 2);
  const Matrix before = store[bn.running_mean()].value;
  std::unique_ptr<LayerCache> cache;
  bn.forward(store, random_batch(2, 4, 2, rng), Mode::Train, nullptr, &cache);
  EXPECT_EQ(store[bn.running_mean()].value, before);
  bn.commit(store, *cache);
  EXPECT_NE(store[bn.running_mean()].value, before);
}

TEST(BatchNorm, GradientMatchesFiniteDifferences) {
  ParamStore store;
  Rng rng(13);
  BatchNorm bn(store, "bn", 3);
  store[bn.gamma()].value = random_matrix(1, 3, rng);
  store[bn.beta()].value = random_matrix(1, 3, rng);
  EXPECT_LT(seq_layer_error(bn, store, random_batch(3, 4, 3, rng), Mode::Train, rng), 1e-5);
}

TEST(Dropout, ZeroRateIsIdentity) {
  Rng rng(14);
  Dropout drop(4, 0.0);
  ParamStore store;
  const SeqBatch x = random_batch(2, 5, 4, rng);
  EXPECT_EQ(drop.forward(store, x, Mode::Train, &rng, nullptr)[0], x[0]);
  EXPECT_EQ(drop.forward(store, x, Mode::Eval, &rng, nullptr)[1], x[1]);
}

TEST(Dropout, EvalModeIsIdentity) {
  Rng rng(15);
  Dropout drop(4, 0.5);
  ParamStore store;
  const SeqBatch x = random_batch(2, 5, 4, rng);
  const SeqBatch y = drop.forward(store, x, Mode::Eval, nullptr, nullptr);
  EXPECT_EQ(y[0], x[0]);
  EXPECT_EQ(y[1], x[1]);
}

TEST(Dropout, EmpiricalDropFraction) {
  Rng rng(16);
  Dropout drop(1000, 0.05);
  ParamStore store;
  const SeqBatch x{Matrix::Ones(1000, 1000)};
  const SeqBatch y = drop.forward(store, x, Mode::Train, &rng, nullptr);
  const double dropped = static_cast<double>((y[0].array() == 0.0).count()) / 1e6;
  EXPECT_NEAR(dropped, 0.05, 0.001);
  const double survivor = y[0].maxCoeff();
  EXPECT_DOUBLE_EQ(survivor, 1.0 / 0.95);
}

TEST(Layers, ForwardIsDeterministicGivenSeed) {
  ParamStore store;
  Rng init(17);
  BiLstm lstm(store, "l", 2, 3, init);
  Dropout drop(6, 0.3);
  const SeqBatch x = random_batch(2, 5, 2, init);
  Rng a(99), b(99);
  const SeqBatch ya = drop.forward(store, lstm.forward(store, x, Mode::Train, &a, nullptr), Mode::Train, &a, nullptr);
  const SeqBatch yb = drop.forward(store, lstm.forward(store, x, Mode::Train, &b, nullptr), Mode::Train, &b, nullptr);
  EXPECT_EQ(ya[0], yb[0]);
  EXPECT_EQ(ya[1], yb[1]);
}

TEST(LayerConfig, ValidationRejectsBadSizes) {
  LayerConfig c;
  c.kind = LayerKind::Dropout;
  c.units = 1;
  c.rate = 1.0;
  EXPECT_ANY_THROW(c.validate());
  c.rate = 0.05;
  EXPECT_NO_THROW(c.validate());
  LayerConfig conv;
  conv.kind = LayerKind::Conv1d;
  conv.units = 4;
  conv.width = 3;
  conv.stride = 0;
  EXPECT_ANY_THROW(conv.validate());
}

#include <gtest/gtest.h>

#include <cstring>
#include <memory>
#include <sstream>

#include "neuralwarp/elastic.hpp"
#include "neuralwarp/errors.hpp"
#include "neuralwarp/eval.hpp"
#include "neuralwarp/model/similarity.hpp"
#include "support.hpp"

using namespace neuralwarp;

namespace {

Dataset random_set(std::size_t n, std::size_t length, int classes, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    TimeSeries s = nwtest::random_series(length, 1, rng);
    s.set_label(static_cast<int>(i % static_cast<std::size_t>(classes)));
    d.instances.push_back(s);
  }
  d.num_classes = classes;
  for (int c = 0; c < classes; ++c) d.class_names.push_back(c);
  d.length = length;
  d.channels = 1;
  return d;
}

std::shared_ptr<const model::SimilarityModel> random_model(std::uint64_t seed) {
  Rng init(seed);
  return std::make_shared<const model::SimilarityModel>(
      model::make_model_config(model::EncoderKind::Rnn, model::SimilarityKind::Warped, model::Scale::Desk, 1), init);
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST(BestNeighbor, TiesGoToLowestIndex) {
  RowVector d(4);
  d << 3.0, 1.0, 1.0, 2.0;
  EXPECT_EQ(best_neighbor(d, Semantics::Distance), 1u);
  RowVector s(4);
  s << 0.2, 0.9, 0.1, 0.9;
  EXPECT_EQ(best_neighbor(s, Semantics::Similarity), 1u);
}

TEST(NnClassify, TestSubsetOfTrainIsPerfectUnderDtw) {
  const Dataset train = random_set(12, 10, 3, 1);
  Dataset test = train;
  test.instances.resize(5);
  const ClassificationResult r = nn_classify(train, test, DtwMeasure());
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.correct, 5u);
}

TEST(NnClassify, SingleTrainingInstance) {
  Dataset train = random_set(1, 8, 1, 2);
  train.instances[0].set_label(0);
  Dataset test = random_set(6, 8, 2, 3);
  test.instances[0].set_label(0);
  const ClassificationResult r = nn_classify(train, test, EuclideanMeasure());
  for (int p : r.predictions) EXPECT_EQ(p, 0);
}

TEST(NnClassify, EmptyTrainAndChannelMismatchRejected) {
  Dataset empty = random_set(1, 8, 1, 2);
  empty.instances.clear();
  const Dataset test = random_set(3, 8, 1, 3);
  EXPECT_THROW(nn_classify(empty, test, DtwMeasure()), ConfigError);
  Dataset wide = test;
  wide.channels = 2;
  Rng rng(4);
  for (auto& s : wide.instances) s = TimeSeries(nwtest::random_matrix(8, 2, rng), 0);
  EXPECT_THROW(nn_classify(wide, test, DtwMeasure()), ConfigError);
}

TEST(NnClassify, InvariantUnderMonotoneTransformOfScores) {
  const Dataset train = random_set(10, 12, 2, 5);
  const Dataset test = random_set(8, 12, 2, 6);
  auto m = random_model(7);
  const LearnedMeasure plain(m, "neuralwarp-rnn");
  const LearnedMeasure logged(m, "neuralwarp-rnn", LearnedMeasure::Options{false, true});
  const Matrix s = plain.score_matrix(test.instances, train.instances);
  const Matrix log_s = logged.score_matrix(test.instances, train.instances);
  EXPECT_LT((s.array().log() - log_s.array()).abs().maxCoeff(), 1e-12);
  const auto a = nn_classify(train, test, plain);
  const auto b = nn_classify(train, test, logged);
  EXPECT_EQ(a.predictions, b.predictions);
  EXPECT_EQ(a.accuracy, b.accuracy);
}

TEST(LearnedMeasure, MatrixAgreesWithPairwiseScore) {
  const Dataset set = random_set(5, 9, 2, 8);
  auto m = random_model(9);
  const LearnedMeasure measure(m, "neuralwarp-rnn");
  const Matrix s = measure.score_matrix(set.instances, set.instances);
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = 0; j < set.size(); ++j)
      EXPECT_NEAR(s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                  measure.score(set.instances[i], set.instances[j]), 1e-12);
}

TEST(LearnedMeasure, SymmetrizedIsSymmetric) {
  const Dataset set = random_set(5, 9, 2, 10);
  const LearnedMeasure measure(random_model(11), "neuralwarp-rnn", LearnedMeasure::Options{true, false});
  const Matrix s = measure.score_matrix(set.instances, set.instances);
  EXPECT_LT((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DistanceMatrix, DtwSymmetricWithZeroDiagonal) {
  const Dataset set = random_set(9, 11, 3, 12);
  const DistanceMatrix d = distance_matrix(set, DtwMeasure());
  EXPECT_EQ(d.semantics, Semantics::Distance);
  EXPECT_LT((d.values - d.values.transpose()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(d.values.diagonal().cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_TRUE((d.values.array() >= 0.0).all());
}

TEST(DistanceMatrix, LearnedConversionStaysInUnitInterval) {
  const Dataset set = random_set(7, 10, 2, 13);
  const DistanceMatrix m = distance_matrix(set, LearnedMeasure(random_model(14), "neuralwarp-rnn"));
  EXPECT_EQ(m.semantics, Semantics::Similarity);
  const Matrix d = as_distances(m);
  EXPECT_TRUE((d.array() >= 0.0).all());
  EXPECT_TRUE((d.array() <= 1.0).all());
  EXPECT_TRUE(bitwise_equal(d, (1.0 - m.values.array()).matrix()));
}

TEST(DistanceMatrix, ParallelEqualsSerialBitwise) {
  const Dataset set = random_set(13, 14, 2, 15);
  const DtwMeasure dtw;
  const TwedMeasure twed;
  const LearnedMeasure learned(random_model(16), "neuralwarp-rnn");
  for (const Measure* m : std::initializer_list<const Measure*>{&dtw, &twed, &learned}) {
    const Matrix serial = distance_matrix(set, *m, 1).values;
    for (unsigned jobs : {2u, 3u, 8u}) {
      EXPECT_TRUE(bitwise_equal(serial, distance_matrix(set, *m, jobs).values)) << m->name() << " jobs " << jobs;
    }
  }
}

TEST(NnClassify, Deterministic) {
  const Dataset train = random_set(10, 12, 2, 17);
  const Dataset test = random_set(6, 12, 2, 18);
  const auto a = nn_classify(train, test, TwedMeasure(), 1);
  const auto b = nn_classify(train, test, TwedMeasure(), 4);
  EXPECT_EQ(a.predictions, b.predictions);
  EXPECT_EQ(a.accuracy, b.accuracy);
}

TEST(Measures, ScoresMatchElasticFunctions) {
  Rng rng(19);
  const TimeSeries a = nwtest::random_series(9, 2, rng);
  const TimeSeries b = nwtest::random_series(7, 2, rng);
  EXPECT_EQ(DtwMeasure().score(a, b), dtw_distance(a, b));
  EXPECT_EQ(TwedMeasure(0.5, 2.0).score(a, b), twed(a, b, 0.5, 2.0));
  EXPECT_THROW(TwedMeasure(-1.0, 1.0), ConfigError);
}

TEST(AccuracyLine, CsvFields) {
  std::ostringstream out;
  write_accuracy_line(out, "dtw", "synthetic", 180, 20, 0.95);
  EXPECT_EQ(out.str(), "dtw,synthetic,180,20,0.95\n");
}

#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "neuralwarp/model/similarity.hpp"
#include "neuralwarp/series.hpp"

namespace neuralwarp {

enum class Semantics { Distance, Similarity };

std::string semantics_name(Semantics semantics);

/// A pure pairwise scorer. Lower is better for distances, higher for similarities.
class Measure {
 public:
  virtual ~Measure() = default;
  virtual std::string name() const = 0;
  virtual Semantics semantics() const = 0;
  virtual double score(const TimeSeries& a, const TimeSeries& b) const = 0;
  /// Scores of every query (rows) against every reference (columns).
  /// Rows are distributed over `jobs` threads; the result does not depend on `jobs`.
  virtual Matrix score_matrix(const std::vector<TimeSeries>& queries,
                              const std::vector<TimeSeries>& refs, unsigned jobs = 1) const;
};

class DtwMeasure : public Measure {
 public:
  explicit DtwMeasure(std::optional<std::size_t> band = std::nullopt) : band_(band) {}
  std::string name() const override { return "dtw"; }
  Semantics semantics() const override { return Semantics::Distance; }
  double score(const TimeSeries& a, const TimeSeries& b) const override;

 private:
  std::optional<std::size_t> band_;
};

class TwedMeasure : public Measure {
 public:
  explicit TwedMeasure(double stiffness = 0.001, double penalty = 1.0);
  std::string name() const override { return "twed"; }
  Semantics semantics() const override { return Semantics::Distance; }
  double score(const TimeSeries& a, const TimeSeries& b) const override;

 private:
  double stiffness_;
  double penalty_;
};

class EuclideanMeasure : public Measure {
 public:
  std::string name() const override { return "euclidean"; }
  Semantics semantics() const override { return Semantics::Distance; }
  double score(const TimeSeries& a, const TimeSeries& b) const override;
};

/// Learned similarity. Encodes each series once per score_matrix call.
class LearnedMeasure : public Measure {
 public:
  struct Options {
    bool symmetrize = false;  ///< score (s(A,B) + s(B,A)) / 2
    bool log_scale = false;   ///< report log_s instead of s
  };

  LearnedMeasure(std::shared_ptr<const model::SimilarityModel> model, std::string name);
  LearnedMeasure(std::shared_ptr<const model::SimilarityModel> model, std::string name, Options options);

  std::string name() const override { return name_; }
  Semantics semantics() const override { return Semantics::Similarity; }
  double score(const TimeSeries& a, const TimeSeries& b) const override;
  Matrix score_matrix(const std::vector<TimeSeries>& queries, const std::vector<TimeSeries>& refs,
                      unsigned jobs = 1) const override;

 private:
  double combine(const Matrix& ea, const Matrix& eb) const;

  std::shared_ptr<const model::SimilarityModel> model_;
  std::string name_;
  Options options_;
};

struct ClassificationResult {
  double accuracy = 0.0;
  std::vector<int> predictions;
  std::size_t correct = 0;
};

/// Index of the best entry in a row of scores; ties go to the lowest index.
std::size_t best_neighbor(const Eigen::Ref<const RowVector>& scores, Semantics semantics);

/// 1-NN classification of `test` against `train`. Throws ConfigError on an
/// empty train set or mismatched channels.
ClassificationResult nn_classify(const Dataset& train, const Dataset& test, const Measure& measure,
                                 unsigned jobs = 1);
/// Same decision rule over precomputed test x train scores.
ClassificationResult nn_classify(const Matrix& scores, Semantics semantics, const Dataset& train,
                                 const Dataset& test);

struct DistanceMatrix {
  Matrix values;
  Semantics semantics = Semantics::Distance;
};

/// All N x N scores of a set with its measure's semantics.
DistanceMatrix distance_matrix(const Dataset& set, const Measure& measure, unsigned jobs = 1);

/// Distances stay as they are; similarities s become 1 - s.
Matrix as_distances(const DistanceMatrix& matrix);

/// "measure,dataset,n_train,n_test,accuracy" without a header.
void write_accuracy_line(std::ostream& out, const std::string& measure, const std::string& dataset,
                         std::size_t n_train, std::size_t n_test, double accuracy);

}  // namespace neuralwarp

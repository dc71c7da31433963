#pragma once

#include <cstdint>
#include <vector>

#include "neuralwarp/model/encoder.hpp"
#include "neuralwarp/model/trainer.hpp"
#include "neuralwarp/nn/layers.hpp"

namespace neuralwarp::model {

/// Softmax over rows of logits.
Matrix softmax_rows(const Matrix& logits);

/// Encoder, mean pooling over encoded indices, dense softmax head.
class Classifier {
 public:
  Classifier() = default;
  Classifier(const EncoderConfig& encoder, int num_classes, Rng& init_rng);

  int num_classes() const { return num_classes_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  /// Probability simplex over classes (eval mode).
  RowVector predict_proba(const TimeSeries& series) const;
  int predict(const TimeSeries& series) const;

  /// Mean cross-entropy over the given instances; optionally accumulates gradients.
  double loss(const Dataset& data, const std::vector<std::size_t>& indices, nn::Mode mode,
              Rng* dropout_rng, bool compute_grads, bool commit_stats);

 private:
  int num_classes_ = 0;
  nn::ParamStore store_;
  Encoder encoder_;
  nn::Dense head_;
};

struct ClassifierTrainResult {
  Classifier model;
  std::vector<TraceRow> trace;
};

/// Cross-entropy training with the same protocol as the similarity models:
/// Adam, element-wise clipping, batches of `2 * pairs_per_side` instances
/// drawn uniformly with replacement.
ClassifierTrainResult classifier_train(const Dataset& data, const EncoderConfig& encoder,
                                       const TrainOptions& options);

/// Per-instance class probabilities, one row per instance.
Matrix classifier_predict(const Classifier& model, const Dataset& data);

}  // namespace neuralwarp::model

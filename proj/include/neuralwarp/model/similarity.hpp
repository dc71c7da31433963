#pragma once

#include <cstdint>
#include <string>

#include "neuralwarp/model/config.hpp"
#include "neuralwarp/model/encoder.hpp"
#include "neuralwarp/model/warper.hpp"
#include "neuralwarp/nn/param_store.hpp"
#include "neuralwarp/series.hpp"

namespace neuralwarp::model {

/// s in (0, 1], carried as log_s <= 0 so that long series do not underflow.
struct SimilarityScore {
  double log_s = 0.0;
  double s() const;
  static SimilarityScore from_log(double log_s) { return SimilarityScore{log_s}; }
};

/// L1 distance between every row of a and every row of b, T_A x T_B.
Matrix pairwise_l1(const Matrix& a, const Matrix& b);

/// log_s = -(1 / (T_A * T_B)) * sum_ij |a_i - b_j|_1 * Phi_ij for given warper outputs.
double warped_log_similarity(const Matrix& ctx_a, const Matrix& ctx_b, const Matrix& phi);

/// log_s = -(1 / T) * sum_i |a_i - b_i|_1. Throws std::invalid_argument on unequal lengths.
double siamese_log_similarity(const Matrix& ctx_a, const Matrix& ctx_b);

/// -log s for positives, -log(1 - s) for negatives, with (1 - s) floored at 1e-12.
double pair_nll(double log_s, int target);
/// d pair_nll / d log_s.
double pair_nll_grad(double log_s, int target);

struct LossResult {
  double loss = 0.0;
  double mean_positive_s = 0.0;
  double mean_negative_s = 0.0;
  /// Negative pairs whose 1 - s fell below the floor, i.e. whose unguarded
  /// -log(1 - s) is numerically infinite.
  std::size_t saturated_negatives = 0;
};

/// Encoder, optional warper and their parameters.
class SimilarityModel {
 public:
  SimilarityModel() = default;
  /// Builds the architecture and draws initial weights from init_rng.
  SimilarityModel(const ModelConfig& config, Rng& init_rng);

  const ModelConfig& config() const { return config_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  const Encoder& encoder() const { return encoder_; }
  const Warper& warper() const { return warper_; }
  bool warped() const { return config_.similarity == SimilarityKind::Warped; }

  Matrix encode(const TimeSeries& series) const { return encoder_.encode(store_, series); }

  /// Eval-mode similarity of two raw series.
  SimilarityScore score(const TimeSeries& a, const TimeSeries& b) const;
  /// Similarity of two already-encoded series.
  SimilarityScore score_encoded(const Matrix& ctx_a, const Matrix& ctx_b) const;

  double warper_prob(const RowVector& ctx_a, const RowVector& ctx_b) const {
    return warper_.prob(store_, ctx_a, ctx_b);
  }

  /// Mean pair loss over a batch: -(1/|P|) sum log s - (1/|N|) sum log(1 - s).
  /// Encodes every pair member as one batch in `mode`; with compute_grads the
  /// gradients are accumulated into params() (callers zero them first).
  /// With commit_stats, batch-norm running averages are updated.
  LossResult pair_loss(const Dataset& data, const PairBatch& batch, nn::Mode mode, Rng* dropout_rng,
                       bool compute_grads, bool commit_stats);

  /// JSON text describing the architecture; stored in checkpoints.
  std::string config_json() const;
  void save(const std::filesystem::path& path) const;
  static SimilarityModel load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  nn::ParamStore store_;
  Encoder encoder_;
  Warper warper_;
};

}  // namespace neuralwarp::model

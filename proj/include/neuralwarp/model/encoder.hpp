#pragma once

#include <memory>
#include <vector>

#include "neuralwarp/model/config.hpp"
#include "neuralwarp/nn/layers.hpp"
#include "neuralwarp/series.hpp"

namespace neuralwarp::model {

/// Maps a batch of T x D series to T_E x K context matrices. Layer objects
/// are immutable and shared between copies; parameters live in the store.
class Encoder {
 public:
  /// Per-call record of layer caches, needed by backward and commit.
  struct Tape {
    std::vector<std::unique_ptr<nn::LayerCache>> caches;
  };

  Encoder() = default;
  Encoder(const EncoderConfig& config, nn::ParamStore& store, Rng& init_rng,
          const std::string& prefix = "encoder");

  const EncoderConfig& config() const { return config_; }
  std::size_t context_width() const { return config_.context_width(); }

  nn::SeqBatch forward(const nn::ParamStore& store, const nn::SeqBatch& x, nn::Mode mode,
                       Rng* dropout_rng, Tape* tape) const;
  /// Accumulates parameter gradients; returns gradients w.r.t. the inputs.
  nn::SeqBatch backward(nn::ParamStore& store, const nn::SeqBatch& grad, const Tape& tape) const;
  /// Folds the batch statistics of a training pass into the running averages.
  void commit(nn::ParamStore& store, const Tape& tape) const;

  /// Eval-mode encoding of one series. Throws ConfigError on a channel mismatch.
  Matrix encode(const nn::ParamStore& store, const TimeSeries& series) const;

 private:
  EncoderConfig config_;
  std::vector<std::shared_ptr<const nn::SeqLayer>> layers_;
};

}  // namespace neuralwarp::model

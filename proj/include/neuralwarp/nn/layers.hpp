#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "neuralwarp/nn/param_store.hpp"
#include "neuralwarp/rng.hpp"

namespace neuralwarp::nn {

/// A batch of sequences, each T x F (rows are time indices).
using SeqBatch = std::vector<Matrix>;

enum class Mode { Train, Eval };

enum class Activation { Identity, Relu, Sigmoid, Tanh };

Activation parse_activation(const std::string& name);
std::string activation_name(Activation act);

Matrix activate(Activation act, const Matrix& z);
/// dL/dz given dL/dy and the activation output y.
Matrix activate_backward(Activation act, const Matrix& y, const Matrix& grad_y);

/// Glorot-uniform sample of shape rows x cols for the given fans.
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, double fan_in, double fan_out, Rng& rng);

enum class LayerKind { Dense, Conv1d, BiLstm, BatchNorm, Dropout };

/// Declarative description of one layer.
struct LayerConfig {
  LayerKind kind = LayerKind::Dense;
  std::size_t units = 0;  ///< dense units, conv filters, or LSTM cells per direction
  std::size_t width = 1;  ///< conv kernel width
  std::size_t stride = 1;
  double rate = 0.0;      ///< dropout rate
  Activation activation = Activation::Identity;

  /// Throws ConfigError unless sizes are positive, stride >= 1 and rate in [0, 1).
  void validate() const;
};

// ---------------------------------------------------------------------------
// Dense

struct DenseCache {
  Matrix x;
  Matrix y;
};

/// y = activation(x W + b) on row-vector inputs. W is in x out, b is 1 x out.
class Dense {
 public:
  Dense() = default;
  Dense(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
        Activation act, Rng& rng);

  Matrix forward(const ParamStore& store, const Matrix& x, DenseCache* cache = nullptr) const;
  /// Accumulates weight gradients into the store and returns dL/dx.
  Matrix backward(ParamStore& store, const Matrix& grad_y, const DenseCache& cache) const;

  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }
  Activation activation() const { return act_; }
  std::size_t weight() const { return w_; }
  std::size_t bias() const { return b_; }

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  Activation act_ = Activation::Identity;
  std::size_t w_ = 0;
  std::size_t b_ = 0;
};

// ---------------------------------------------------------------------------
// Sequence layers

struct LayerCache {
  virtual ~LayerCache() = default;
};

/// A layer mapping a batch of sequences to a batch of sequences. forward is
/// const over the store so that frozen models can be scored concurrently;
/// when `cache` is non-null the layer records what backward needs.
class SeqLayer {
 public:
  virtual ~SeqLayer() = default;

  virtual std::size_t output_width() const = 0;
  virtual std::size_t output_length(std::size_t length) const { return length; }

  virtual SeqBatch forward(const ParamStore& store, const SeqBatch& x, Mode mode, Rng* rng,
                           std::unique_ptr<LayerCache>* cache) const = 0;
  virtual SeqBatch backward(ParamStore& store, const SeqBatch& grad_y,
                            const LayerCache& cache) const = 0;
  /// Applies side effects of a training forward pass (running statistics).
  virtual void commit(ParamStore& /*store*/, const LayerCache& /*cache*/) const {}
};

/// 1-D cross-correlation with 'same' zero padding, output length ceil(T / stride).
/// Filters are stored as a (width * in) x out matrix, tap-major.
class Conv1d : public SeqLayer {
 public:
  /// Without `bias` the layer has no ".b" group (useful in front of batch norm).
  Conv1d(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t filters,
         std::size_t width, std::size_t stride, Rng& rng, bool bias = true);

  std::size_t output_width() const override { return filters_; }
  std::size_t output_length(std::size_t length) const override;
  /// Zero padding placed before the first sample for a given input length.
  std::size_t pad_left(std::size_t length) const;

  SeqBatch forward(const ParamStore& store, const SeqBatch& x, Mode mode, Rng* rng,
                   std::unique_ptr<LayerCache>* cache) const override;
  SeqBatch backward(ParamStore& store, const SeqBatch& grad_y, const LayerCache& cache) const override;

  std::size_t weight() const { return w_; }
  bool has_bias() const { return has_bias_; }
  std::size_t bias() const { return b_; }

 private:
  Matrix im2col(const Matrix& x) const;

  std::size_t in_;
  std::size_t filters_;
  std::size_t width_;
  std::size_t stride_;
  std::size_t w_;
  bool has_bias_;
  std::size_t b_ = 0;
};

/// Bidirectional LSTM; output row t is [h_forward(t) ; h_backward(t)], width 2H.
/// Gate blocks in the 4H columns are ordered input, forget, candidate, output.
/// Sequences in one batch must share their length.
class BiLstm : public SeqLayer {
 public:
  BiLstm(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t cells, Rng& rng);

  std::size_t output_width() const override { return 2 * cells_; }

  SeqBatch forward(const ParamStore& store, const SeqBatch& x, Mode mode, Rng* rng,
                   std::unique_ptr<LayerCache>* cache) const override;
  SeqBatch backward(ParamStore& store, const SeqBatch& grad_y, const LayerCache& cache) const override;

  struct Direction {
    std::size_t wx;
    std::size_t wh;
    std::size_t b;
  };
  const Direction& forward_dir() const { return dirs_[0]; }
  const Direction& backward_dir() const { return dirs_[1]; }

 private:
  std::size_t in_;
  std::size_t cells_;
  Direction dirs_[2];
};

/// Per-feature normalization over every row of every sequence in the batch.
/// Running statistics move with momentum 0.9 on commit; eval mode uses them.
class BatchNorm : public SeqLayer {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.9;

  BatchNorm(ParamStore& store, const std::string& prefix, std::size_t features);

  std::size_t output_width() const override { return features_; }

  SeqBatch forward(const ParamStore& store, const SeqBatch& x, Mode mode, Rng* rng,
                   std::unique_ptr<LayerCache>* cache) const override;
  SeqBatch backward(ParamStore& store, const SeqBatch& grad_y, const LayerCache& cache) const override;
  void commit(ParamStore& store, const LayerCache& cache) const override;

  std::size_t gamma() const { return gamma_; }
  std::size_t beta() const { return beta_; }
  std::size_t running_mean() const { return mean_; }
  std::size_t running_var() const { return var_; }

 private:
  std::size_t features_;
  std::size_t gamma_;
  std::size_t beta_;
  std::size_t mean_;
  std::size_t var_;
};

/// Inverted dropout: train mode zeroes units with probability `rate` and
/// scales survivors by 1 / (1 - rate); eval mode is the identity.
class Dropout : public SeqLayer {
 public:
  Dropout(std::size_t features, double rate);

  std::size_t output_width() const override { return features_; }
  double rate() const { return rate_; }

  SeqBatch forward(const ParamStore& store, const SeqBatch& x, Mode mode, Rng* rng,
                   std::unique_ptr<LayerCache>* cache) const override;
  SeqBatch backward(ParamStore& store, const SeqBatch& grad_y, const LayerCache& cache) const override;

 private:
  std::size_t features_;
  double rate_;
};

class ActivationLayer : public SeqLayer {
 public:
  ActivationLayer(std::size_t features, Activation act) : features_(features), act_(act) {}

  std::size_t output_width() const override { return features_; }

  SeqBatch forward(const ParamStore& store, const SeqBatch& x, Mode mode, Rng* rng,
                   std::unique_ptr<LayerCache>* cache) const override;
  SeqBatch backward(ParamStore& store, const SeqBatch& grad_y, const LayerCache& cache) const override;

 private:
  std::size_t features_;
  Activation act_;
};

}  // namespace neuralwarp::nn

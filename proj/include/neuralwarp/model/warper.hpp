#pragma once

#include <vector>

#include "neuralwarp/model/config.hpp"
#include "neuralwarp/nn/layers.hpp"
#include "neuralwarp/series.hpp"

namespace neuralwarp::model {

/// Alignment network on concatenated context pairs [ctx_a ; ctx_b] -> (0, 1).
///
/// The all-pairs evaluation splits the first weight matrix into the rows
/// acting on ctx_a and those acting on ctx_b, so each context is projected
/// once rather than once per pair.
class Warper {
 public:
  struct PairCache {
    Matrix ctx_a;
    Matrix ctx_b;
    Matrix first_out;  ///< activated first layer, (T_A * T_B) x H1, row i * T_B + j
    std::vector<nn::DenseCache> rest;
  };

  Warper() = default;
  Warper(const WarperConfig& config, std::size_t context_width, nn::ParamStore& store, Rng& init_rng,
         const std::string& prefix = "warper");

  const WarperConfig& config() const { return config_; }
  std::size_t context_width() const { return context_width_; }
  const std::vector<nn::Dense>& layers() const { return layers_; }

  /// Single-pair probability through the plain dense stack.
  double prob(const nn::ParamStore& store, const RowVector& ctx_a, const RowVector& ctx_b) const;

  /// T_A x T_B matrix of probabilities for every (i, j) row pair.
  Matrix all_pairs(const nn::ParamStore& store, const Matrix& ctx_a, const Matrix& ctx_b,
                   PairCache* cache = nullptr) const;

  /// Backpropagates dL/dPhi (T_A x T_B); accumulates weight gradients and
  /// adds the context gradients into grad_a and grad_b.
  void backward_all_pairs(nn::ParamStore& store, const Matrix& grad_phi, const PairCache& cache,
                          Matrix& grad_a, Matrix& grad_b) const;

 private:
  WarperConfig config_;
  std::size_t context_width_ = 0;
  std::vector<nn::Dense> layers_;
};

}  // namespace neuralwarp::model

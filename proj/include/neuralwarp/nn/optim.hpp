#pragma once

#include "neuralwarp/nn/param_store.hpp"

namespace neuralwarp::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of every trainable group from its .grad.
/// Throws DivergenceError and leaves the store untouched if any gradient is
/// non-finite.
void adam_step(ParamStore& store, double learning_rate, const AdamOptions& options = {});

/// Element-wise clamp of every trainable gradient to [-max_magnitude, max_magnitude].
void clip_gradients(ParamStore& store, double max_magnitude = 10.0);
Matrix clip_gradients(const Matrix& grad, double max_magnitude = 10.0);

}  // namespace neuralwarp::nn

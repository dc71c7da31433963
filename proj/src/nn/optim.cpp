#include "neuralwarp/nn/optim.hpp"

#include <cmath>

#include "neuralwarp/errors.hpp"

namespace neuralwarp::nn {

void adam_step(ParamStore& store, double learning_rate, const AdamOptions& options) {
  for (const auto& p : store) {
    if (p.trainable && !p.grad.allFinite()) {
      throw DivergenceError("non-finite gradient in '" + p.name + "'");
    }
  }
  ++store.step;
  const double t = static_cast<double>(store.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  for (auto& p : store) {
    if (!p.trainable) continue;
    p.m = options.beta1 * p.m + (1.0 - options.beta1) * p.grad;
    p.v = options.beta2 * p.v + (1.0 - options.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= learning_rate * (p.m.array() / correction1) /
                       ((p.v.array() / correction2).sqrt() + options.epsilon);
  }
}

void clip_gradients(ParamStore& store, double max_magnitude) {
  for (auto& p : store) {
    if (p.trainable) p.grad = p.grad.cwiseMax(-max_magnitude).cwiseMin(max_magnitude);
  }
}

Matrix clip_gradients(const Matrix& grad, double max_magnitude) {
  return grad.cwiseMax(-max_magnitude).cwiseMin(max_magnitude);
}

}  // namespace neuralwarp::nn

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "neuralwarp/model/config.hpp"
#include "neuralwarp/nn/gradcheck.hpp"

namespace neuralwarp::model {

struct PairLossCheckOptions {
  std::size_t length = 8;
  std::size_t pairs_per_side = 2;
  std::uint64_t seed = 0;
  double epsilon = 1e-5;
  bool skip_kinks = true;
  /// Parameter groups left out by name, for parameters whose exact gradient
  /// is zero by construction and would only measure rounding noise.
  std::vector<std::string> exclude_groups;
};

/// Central-difference check of the training-mode pair loss against every
/// trainable parameter of a freshly initialized model. Dropout masks are
/// frozen by replaying the same stream for every evaluation. Components whose
/// probes land on different sides of a ReLU or |.| kink are skipped.
nn::GradCheckReport check_pair_loss_gradients(const ModelConfig& config,
                                              const PairLossCheckOptions& options = {});

}  // namespace neuralwarp::model

#include "neuralwarp/model/gradient_check.hpp"

#include <algorithm>

#include "neuralwarp/model/similarity.hpp"

namespace neuralwarp::model {

nn::GradCheckReport check_pair_loss_gradients(const ModelConfig& config,
                                              const PairLossCheckOptions& options) {
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.instances_per_class = 3;
  spec.length = options.length;
  spec.channels = config.encoder.input_channels;
  spec.shift_range = options.length / 4;
  Rng data_rng = derive_stream(options.seed, "data");
  const Dataset data = gen_synthetic(spec, data_rng);

  Rng init_rng = derive_stream(options.seed, "init");
  SimilarityModel model(config, init_rng);
  Rng sampling_rng = derive_stream(options.seed, "sampling");
  const PairBatch batch = sample_pair_batch(data, options.pairs_per_side, sampling_rng);
  const Rng dropout_base = derive_stream(options.seed, "dropout");

  auto& store = model.params();
  store.zero_grad();
  {
    Rng dropout = dropout_base;
    model.pair_loss(data, batch, nn::Mode::Train, &dropout, true, false);
  }
  auto loss = [&] {
    Rng dropout = dropout_base;
    return model.pair_loss(data, batch, nn::Mode::Train, &dropout, false, false).loss;
  };
  std::vector<nn::GradTarget> targets = nn::trainable_targets(store);
  std::erase_if(targets, [&](const nn::GradTarget& t) {
    return std::find(options.exclude_groups.begin(), options.exclude_groups.end(), t.name) !=
           options.exclude_groups.end();
  });
  return nn::finite_diff_check(loss, targets, options.epsilon, options.skip_kinks);
}

}  // namespace neuralwarp::model

#include "neuralwarp/model/classifier.hpp"

#include <cmath>

#include "neuralwarp/errors.hpp"
#include "neuralwarp/nn/optim.hpp"

namespace neuralwarp::model {

Matrix softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double peak = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - peak).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Classifier::Classifier(const EncoderConfig& encoder, int num_classes, Rng& init_rng)
    : num_classes_(num_classes) {
  if (num_classes < 1) throw ConfigError("classifier needs at least one class");
  encoder_ = Encoder(encoder, store_, init_rng);
  head_ = nn::Dense(store_, "head", encoder_.context_width(), static_cast<std::size_t>(num_classes),
                    nn::Activation::Identity, init_rng);
}

RowVector Classifier::predict_proba(const TimeSeries& series) const {
  const Matrix ctx = encoder_.encode(store_, series);
  const Matrix pooled = ctx.colwise().mean();
  return softmax_rows(head_.forward(store_, pooled)).row(0);
}

int Classifier::predict(const TimeSeries& series) const {
  Eigen::Index best = 0;
  predict_proba(series).maxCoeff(&best);
  return static_cast<int>(best);
}

double Classifier::loss(const Dataset& data, const std::vector<std::size_t>& indices, nn::Mode mode,
                        Rng* dropout_rng, bool compute_grads, bool commit_stats) {
  nn::SeqBatch inputs;
  for (auto i : indices) inputs.push_back(data.instances.at(i).values());
  Encoder::Tape tape;
  const nn::SeqBatch ctx = encoder_.forward(store_, inputs, mode, dropout_rng,
                                            compute_grads || commit_stats ? &tape : nullptr);
  const auto n = static_cast<Eigen::Index>(indices.size());
  Matrix pooled(n, static_cast<Eigen::Index>(encoder_.context_width()));
  for (Eigen::Index k = 0; k < n; ++k) pooled.row(k) = ctx[static_cast<std::size_t>(k)].colwise().mean();

  nn::DenseCache cache;
  const Matrix probs = softmax_rows(head_.forward(store_, pooled, &cache));
  double total = 0.0;
  Matrix grad_logits = probs;
  for (Eigen::Index k = 0; k < n; ++k) {
    const int label = data.instances.at(indices[static_cast<std::size_t>(k)]).label().value_or(0);
    if (label >= num_classes_) throw ConfigError("label outside the classifier's classes");
    total -= std::log(std::max(probs(k, label), 1e-300));
    grad_logits(k, label) -= 1.0;
  }
  const double loss = total / static_cast<double>(n);

  if (compute_grads) {
    grad_logits /= static_cast<double>(n);
    const Matrix grad_pooled = head_.backward(store_, grad_logits, cache);
    nn::SeqBatch grad_ctx;
    for (Eigen::Index k = 0; k < n; ++k) {
      const Matrix& c = ctx[static_cast<std::size_t>(k)];
      grad_ctx.push_back(grad_pooled.row(k).replicate(c.rows(), 1) / static_cast<double>(c.rows()));
    }
    encoder_.backward(store_, grad_ctx, tape);
  }
  if (commit_stats) encoder_.commit(store_, tape);
  return loss;
}

ClassifierTrainResult classifier_train(const Dataset& data, const EncoderConfig& encoder,
                                       const TrainOptions& options) {
  if (data.size() == 0) throw ConfigError("classifier training needs instances");
  Rng init_rng = derive_stream(options.seed, "init");
  Rng sampling_rng = derive_stream(options.seed, "sampling");
  Rng dropout_rng = derive_stream(options.seed, "dropout");
  ClassifierTrainResult result{Classifier(encoder, data.num_classes, init_rng), {}};

  const std::size_t batch = std::max<std::size_t>(1, 2 * options.pairs_per_side);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<double> losses;
  double sum = 0.0;
  for (std::size_t it = 1; it <= options.iterations; ++it) {
    std::vector<std::size_t> indices(batch);
    for (auto& i : indices) i = pick(sampling_rng);
    auto& store = result.model.params();
    store.zero_grad();
    const double l = result.model.loss(data, indices, nn::Mode::Train, &dropout_rng, true, true);
    if (!std::isfinite(l)) throw DivergenceError("non-finite classifier loss");
    nn::clip_gradients(store, options.clip);
    nn::adam_step(store, options.learning_rate);
    losses.push_back(l);
    sum += l;
    if (losses.size() > options.smoothing_window) sum -= losses[losses.size() - 1 - options.smoothing_window];
    const std::size_t count = std::min(losses.size(), options.smoothing_window);
    result.trace.push_back({it, l, sum / static_cast<double>(count)});
  }
  return result;
}

Matrix classifier_predict(const Classifier& model, const Dataset& data) {
  Matrix out(static_cast<Eigen::Index>(data.size()), model.num_classes());
  for (std::size_t n = 0; n < data.size(); ++n) {
    out.row(static_cast<Eigen::Index>(n)) = model.predict_proba(data.instances[n]);
  }
  return out;
}

}  // namespace neuralwarp::model

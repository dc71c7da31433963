#include "neuralwarp/model/encoder.hpp"

#include "neuralwarp/errors.hpp"

namespace neuralwarp::model {

using nn::LayerKind;

Encoder::Encoder(const EncoderConfig& config, nn::ParamStore& store, Rng& init_rng,
                 const std::string& prefix)
    : config_(config) {
  config_.validate();
  std::size_t width = config_.input_channels;
  for (std::size_t i = 0; i < config_.layers.size(); ++i) {
    const auto& l = config_.layers[i];
    const std::string name = prefix + "." + std::to_string(i);
    switch (l.kind) {
      case LayerKind::Conv1d: {
        // A batch norm directly after the convolution absorbs any bias.
        const bool normalized = l.activation == nn::Activation::Identity && i + 1 < config_.layers.size() &&
                                config_.layers[i + 1].kind == LayerKind::BatchNorm;
        layers_.push_back(std::make_shared<nn::Conv1d>(store, name + ".conv", width, l.units, l.width,
                                                       l.stride, init_rng, !normalized));
        width = l.units;
        break;
      }
      case LayerKind::BiLstm:
        layers_.push_back(std::make_shared<nn::BiLstm>(store, name + ".bilstm", width, l.units, init_rng));
        width = 2 * l.units;
        break;
      case LayerKind::BatchNorm:
        layers_.push_back(std::make_shared<nn::BatchNorm>(store, name + ".bn", width));
        break;
      case LayerKind::Dropout:
        layers_.push_back(std::make_shared<nn::Dropout>(width, l.rate));
        break;
      case LayerKind::Dense:
        throw ConfigError("dense layers are not sequence encoder layers");
    }
    if (l.activation != nn::Activation::Identity) {
      layers_.push_back(std::make_shared<nn::ActivationLayer>(width, l.activation));
    }
  }
}

nn::SeqBatch Encoder::forward(const nn::ParamStore& store, const nn::SeqBatch& x, nn::Mode mode,
                              Rng* dropout_rng, Tape* tape) const {
  for (const auto& s : x) {
    if (static_cast<std::size_t>(s.cols()) != config_.input_channels) {
      throw ConfigError("series has " + std::to_string(s.cols()) + " channels, encoder expects " +
                        std::to_string(config_.input_channels));
    }
  }
  if (tape) tape->caches.clear();
  nn::SeqBatch h = x;
  for (const auto& layer : layers_) {
    std::unique_ptr<nn::LayerCache> cache;
    h = layer->forward(store, h, mode, dropout_rng, tape ? &cache : nullptr);
    if (tape) tape->caches.push_back(std::move(cache));
  }
  return h;
}

nn::SeqBatch Encoder::backward(nn::ParamStore& store, const nn::SeqBatch& grad, const Tape& tape) const {
  nn::SeqBatch g = grad;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(store, g, *tape.caches[i]);
  }
  return g;
}

void Encoder::commit(nn::ParamStore& store, const Tape& tape) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->commit(store, *tape.caches[i]);
}

Matrix Encoder::encode(const nn::ParamStore& store, const TimeSeries& series) const {
  auto out = forward(store, {series.values()}, nn::Mode::Eval, nullptr, nullptr);
  return std::move(out.front());
}

}  // namespace neuralwarp::model

#include "neuralwarp/model/config.hpp"

#include "neuralwarp/errors.hpp"

namespace neuralwarp::model {

using nn::Activation;
using nn::LayerConfig;
using nn::LayerKind;

namespace {

LayerConfig conv(std::size_t filters, std::size_t width, std::size_t stride) {
  LayerConfig l;
  l.kind = LayerKind::Conv1d;
  l.units = filters;
  l.width = width;
  l.stride = stride;
  return l;
}

LayerConfig bilstm(std::size_t cells) {
  LayerConfig l;
  l.kind = LayerKind::BiLstm;
  l.units = cells;
  return l;
}

LayerConfig batchnorm(Activation act) {
  LayerConfig l;
  l.kind = LayerKind::BatchNorm;
  l.activation = act;
  return l;
}

LayerConfig dropout(double rate) {
  LayerConfig l;
  l.kind = LayerKind::Dropout;
  l.rate = rate;
  return l;
}

EncoderConfig cnn(std::size_t channels, std::size_t f1, std::size_t f2, std::size_t f3) {
  EncoderConfig c;
  c.kind = EncoderKind::Cnn;
  c.input_channels = channels;
  c.layers = {conv(f1, 5, 2), batchnorm(Activation::Relu), conv(f2, 5, 1), batchnorm(Activation::Relu),
              conv(f3, 3, 1), batchnorm(Activation::Relu), dropout(0.05)};
  return c;
}

std::string kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::BiLstm: return "bilstm";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Dropout: return "dropout";
  }
  return "dense";
}

LayerKind parse_kind(const std::string& name) {
  if (name == "dense") return LayerKind::Dense;
  if (name == "conv1d") return LayerKind::Conv1d;
  if (name == "bilstm") return LayerKind::BiLstm;
  if (name == "batchnorm") return LayerKind::BatchNorm;
  if (name == "dropout") return LayerKind::Dropout;
  throw ConfigError("unknown layer kind '" + name + "'");
}

}  // namespace

std::size_t EncoderConfig::context_width() const {
  std::size_t width = input_channels;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::Conv1d || l.kind == LayerKind::Dense) width = l.units;
    if (l.kind == LayerKind::BiLstm) width = 2 * l.units;
  }
  return width;
}

std::size_t EncoderConfig::encoded_length(std::size_t length) const {
  for (const auto& l : layers) {
    if (l.kind == LayerKind::Conv1d) length = (length + l.stride - 1) / l.stride;
  }
  return length;
}

void EncoderConfig::validate() const {
  if (input_channels == 0) throw ConfigError("encoder needs at least one input channel");
  if (layers.empty()) throw ConfigError("encoder has no layers");
  for (const auto& l : layers) {
    l.validate();
    if (l.kind == LayerKind::Dense) throw ConfigError("dense layers are not sequence encoder layers");
  }
}

EncoderConfig EncoderConfig::cnn_paper(std::size_t channels) { return cnn(channels, 1024, 128, 64); }

EncoderConfig EncoderConfig::cnn_desk(std::size_t channels) { return cnn(channels, 32, 16, 16); }

EncoderConfig EncoderConfig::rnn_paper(std::size_t channels) {
  EncoderConfig c;
  c.kind = EncoderKind::Rnn;
  c.input_channels = channels;
  c.layers = {bilstm(128), bilstm(64), bilstm(32), batchnorm(Activation::Identity), dropout(0.05)};
  return c;
}

EncoderConfig EncoderConfig::rnn_desk(std::size_t channels) {
  EncoderConfig c;
  c.kind = EncoderKind::Rnn;
  c.input_channels = channels;
  c.layers = {bilstm(8), batchnorm(Activation::Identity), dropout(0.05)};
  return c;
}

Scale parse_scale(const std::string& name) {
  if (name == "desk") return Scale::Desk;
  if (name == "paper") return Scale::Paper;
  throw ConfigError("unknown scale '" + name + "'");
}

std::string scale_name(Scale scale) { return scale == Scale::Desk ? "desk" : "paper"; }

EncoderKind parse_encoder_kind(const std::string& name) {
  if (name == "cnn") return EncoderKind::Cnn;
  if (name == "rnn") return EncoderKind::Rnn;
  throw ConfigError("unknown encoder kind '" + name + "'");
}

std::string encoder_kind_name(EncoderKind kind) { return kind == EncoderKind::Cnn ? "cnn" : "rnn"; }

ModelConfig make_model_config(EncoderKind encoder, SimilarityKind similarity, Scale scale,
                              std::size_t channels) {
  ModelConfig c;
  if (scale == Scale::Desk) {
    c.encoder = encoder == EncoderKind::Cnn ? EncoderConfig::cnn_desk(channels)
                                            : EncoderConfig::rnn_desk(channels);
    c.warper = WarperConfig::desk();
  } else {
    c.encoder = encoder == EncoderKind::Cnn ? EncoderConfig::cnn_paper(channels)
                                            : EncoderConfig::rnn_paper(channels);
    c.warper = WarperConfig::paper();
  }
  c.similarity = similarity;
  return c;
}

nlohmann::json to_json(const LayerConfig& layer) {
  nlohmann::json j{{"kind", kind_name(layer.kind)}, {"activation", nn::activation_name(layer.activation)}};
  switch (layer.kind) {
    case LayerKind::Conv1d:
      j["filters"] = layer.units;
      j["width"] = layer.width;
      j["stride"] = layer.stride;
      break;
    case LayerKind::BiLstm:
      j["cells"] = layer.units;
      break;
    case LayerKind::Dense:
      j["units"] = layer.units;
      break;
    case LayerKind::Dropout:
      j["rate"] = layer.rate;
      break;
    case LayerKind::BatchNorm:
      break;
  }
  return j;
}

nlohmann::json to_json(const EncoderConfig& config) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : config.layers) layers.push_back(to_json(l));
  return {{"kind", encoder_kind_name(config.kind)},
          {"input_channels", config.input_channels},
          {"context_width", config.context_width()},
          {"layers", layers}};
}

nlohmann::json to_json(const WarperConfig& config) {
  return {{"hidden", config.hidden},
          {"hidden_activation", nn::activation_name(config.hidden_activation)},
          {"output", "sigmoid"}};
}

nlohmann::json to_json(const ModelConfig& config) {
  return {{"encoder", to_json(config.encoder)},
          {"warper", to_json(config.warper)},
          {"similarity", config.similarity == SimilarityKind::Warped ? "warped" : "siamese"}};
}

LayerConfig layer_from_json(const nlohmann::json& j) {
  LayerConfig l;
  l.kind = parse_kind(j.at("kind").get<std::string>());
  l.activation = nn::parse_activation(j.value("activation", std::string("identity")));
  switch (l.kind) {
    case LayerKind::Conv1d:
      l.units = j.at("filters").get<std::size_t>();
      l.width = j.at("width").get<std::size_t>();
      l.stride = j.at("stride").get<std::size_t>();
      break;
    case LayerKind::BiLstm:
      l.units = j.at("cells").get<std::size_t>();
      break;
    case LayerKind::Dense:
      l.units = j.at("units").get<std::size_t>();
      break;
    case LayerKind::Dropout:
      l.rate = j.at("rate").get<double>();
      break;
    case LayerKind::BatchNorm:
      break;
  }
  return l;
}

EncoderConfig encoder_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.kind = parse_encoder_kind(j.at("kind").get<std::string>());
  c.input_channels = j.at("input_channels").get<std::size_t>();
  for (const auto& l : j.at("layers")) c.layers.push_back(layer_from_json(l));
  c.validate();
  return c;
}

WarperConfig warper_from_json(const nlohmann::json& j) {
  WarperConfig c;
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.hidden_activation = nn::parse_activation(j.value("hidden_activation", std::string("relu")));
  return c;
}

ModelConfig model_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.encoder = encoder_from_json(j.at("encoder"));
  c.warper = warper_from_json(j.at("warper"));
  const auto sim = j.at("similarity").get<std::string>();
  if (sim == "warped") {
    c.similarity = SimilarityKind::Warped;
  } else if (sim == "siamese") {
    c.similarity = SimilarityKind::Siamese;
  } else {
    throw ConfigError("unknown similarity kind '" + sim + "'");
  }
  return c;
}

}  // namespace neuralwarp::model

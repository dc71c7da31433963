#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "neuralwarp/nn/layers.hpp"

namespace neuralwarp::model {

enum class EncoderKind { Cnn, Rnn };

/// Encoder layer stack. A layer's `activation` is applied right after it.
struct EncoderConfig {
  EncoderKind kind = EncoderKind::Rnn;
  std::size_t input_channels = 1;
  std::vector<nn::LayerConfig> layers;

  /// Width K of the produced context vectors.
  std::size_t context_width() const;
  /// Encoded length for a raw length T.
  std::size_t encoded_length(std::size_t length) const;
  void validate() const;

  /// Three conv layers of 1024/128/64 filters, widths 5/5/3, strides 2/1/1,
  /// each followed by batch norm and ReLU; dropout 0.05. K = 64.
  static EncoderConfig cnn_paper(std::size_t channels);
  /// Three bi-LSTM layers of 128/64/32 cells per direction (256/128/64 wide),
  /// terminal batch norm and dropout 0.05. K = 64.
  static EncoderConfig rnn_paper(std::size_t channels);
  /// Conv stack 32/16/16 with the paper widths and strides. K = 16.
  static EncoderConfig cnn_desk(std::size_t channels);
  /// One bi-LSTM layer of 8 cells per direction, batch norm, dropout 0.05. K = 16.
  static EncoderConfig rnn_desk(std::size_t channels);
};

/// Fully connected warper on [ctx_a ; ctx_b]: hidden layers then one sigmoid unit.
struct WarperConfig {
  std::vector<std::size_t> hidden{64, 16};
  nn::Activation hidden_activation = nn::Activation::Relu;

  static WarperConfig paper() { return WarperConfig{{64, 16}, nn::Activation::Relu}; }
  static WarperConfig desk() { return WarperConfig{{16, 8, 4}, nn::Activation::Relu}; }
};

enum class SimilarityKind { Warped, Siamese };

struct ModelConfig {
  EncoderConfig encoder;
  WarperConfig warper;
  SimilarityKind similarity = SimilarityKind::Warped;
};

enum class Scale { Desk, Paper };

Scale parse_scale(const std::string& name);
std::string scale_name(Scale scale);
EncoderKind parse_encoder_kind(const std::string& name);
std::string encoder_kind_name(EncoderKind kind);

ModelConfig make_model_config(EncoderKind encoder, SimilarityKind similarity, Scale scale,
                              std::size_t channels);

nlohmann::json to_json(const nn::LayerConfig& layer);
nlohmann::json to_json(const EncoderConfig& config);
nlohmann::json to_json(const WarperConfig& config);
nlohmann::json to_json(const ModelConfig& config);
nn::LayerConfig layer_from_json(const nlohmann::json& j);
EncoderConfig encoder_from_json(const nlohmann::json& j);
WarperConfig warper_from_json(const nlohmann::json& j);
ModelConfig model_from_json(const nlohmann::json& j);

}  // namespace neuralwarp::model

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lipread/ctc.hpp"
#include "lipread/layers.hpp"
#include "lipread/recurrent.hpp"
#include "lipread/tensor.hpp"

namespace lipread {

struct ConvLayerConfig {
  std::size_t channels = 1;
  Extent3 kernel{3, 5, 5};
  Extent3 stride{1, 1, 1};
  Extent3 pad{1, 2, 2};

  bool operator==(const ConvLayerConfig&) const = default;
};

/// Video branch: three conv + max-pool blocks, two Bi-GRU layers, a linear
/// projection onto the vocabulary and a log-softmax.
///
/// The defaults reproduce the reference shape chain for 75 x 3 x 50 x 100
/// clips: conv1 3x5x5 stride (1,2,2) pad (1,2,2) -> 32 channels, conv2
/// 3x5x5 stride 1 pad (1,2,2) -> 64, conv3 3x3x3 stride 1 pad 1 -> 96, each
/// followed by a 1x2x2 max pool.
struct LipNetConfig {
  std::size_t frames = 75;
  std::size_t in_channels = 3;
  std::size_t height = 50;
  std::size_t width = 100;
  std::array<ConvLayerConfig, 3> conv{{
      {32, {3, 5, 5}, {1, 2, 2}, {1, 2, 2}},
      {64, {3, 5, 5}, {1, 1, 1}, {1, 2, 2}},
      {96, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}},
  }};
  PoolSpec pool{};
  std::size_t gru_hidden = 256;
  std::size_t vocab_size = 28;

  /// Same wiring on 1 x 8 x 8 frames. conv1 keeps full spatial resolution so
  /// that three 2x2 pools still fit.
  static LipNetConfig shrunken(std::size_t frames = 6, std::size_t vocab_size = 4);

  ConvSpec conv_spec(std::size_t layer) const;
  void validate() const;

  /// Expected activation shapes, in order: conv1, pool1, conv2, pool2,
  /// conv3, pool3, flattened features, gru1, gru2, logits.
  std::vector<Shape> shape_chain() const;
  std::size_t feature_width() const;

  bool operator==(const LipNetConfig&) const = default;
};

/// Audio branch: LSTM over MFCC frames, linear layer on the last hidden
/// state, softmax over word classes.
struct AudioNetConfig {
  std::size_t input_coeffs = 13;
  std::size_t hidden = 256;
  std::size_t n_classes = 10;

  void validate() const;
  bool operator==(const AudioNetConfig&) const = default;
};

enum class ModelKind { LipNet, AudioNet };

using ParamMap = std::map<std::string, Tensor>;
using ParamLayout = std::vector<std::pair<std::string, Shape>>;

ParamLayout parameter_layout(const LipNetConfig& cfg);
ParamLayout parameter_layout(const AudioNetConfig& cfg);

struct ModelParams {
  std::variant<LipNetConfig, AudioNetConfig> config;
  ParamMap params;
  /// Free-form string annotations persisted with checkpoints.
  std::map<std::string, std::string> metadata;

  ModelKind kind() const noexcept;
  const LipNetConfig& lipnet() const;
  const AudioNetConfig& audio() const;
  ParamLayout layout() const;
  const Tensor& param(const std::string& name) const;
  /// Throws if any expected tensor is missing, misshapen or extra.
  void check_layout() const;
};

GruParams gru_params(const ParamMap& params, const std::string& prefix);
LstmParams lstm_params(const ParamMap& params, const std::string& prefix);

ModelParams build_lipnet(const LipNetConfig& cfg, std::uint64_t seed);
ModelParams build_audio_net(const AudioNetConfig& cfg, std::uint64_t seed);

/// Intermediate activations of one lipnet_forward call, kept for backprop.
struct LipNetTrace {
  Tensor input;
  std::array<Tensor, 3> conv;
  std::array<Tensor, 3> pooled;
  Tensor features;
  Tensor gru1;
  Tensor gru2;
  Tensor logits;
};

/// Runs the video branch on a T x C x H x W clip. Every intermediate shape is
/// checked against cfg.shape_chain(). Fills `trace` when given.
LogProbMatrix lipnet_forward(const ModelParams& m, const Tensor& video, LipNetTrace* trace = nullptr);

struct ModelGrads {
  ParamMap params;
  Tensor input;
};

/// Backpropagates a gradient with respect to the logits through a recorded
/// forward pass.
ModelGrads lipnet_backward(const ModelParams& m, const LipNetTrace& trace, const Tensor& grad_logits);

/// Pre-softmax class scores for a T x n_coeffs feature matrix.
Tensor audio_logits(const ModelParams& m, const Tensor& features);
/// Class probabilities, length n_classes.
Tensor audio_forward(const ModelParams& m, const Tensor& features);
ModelGrads audio_backward(const ModelParams& m, const Tensor& features, const Tensor& grad_logits);

}  // namespace lipread

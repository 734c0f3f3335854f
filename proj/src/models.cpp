// SPDX-License-Identifier: Apache-2.0
#include "lipread/models.hpp"

#include <cmath>
#include <set>

#include "lipread/error.hpp"

namespace lipread {

namespace {

const char* const kGruGates[] = {"w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h"};
const char* const kLstmGates[] = {"w_i", "w_f", "w_o", "w_g", "u_i", "u_f",
                                  "u_o", "u_g", "b_i", "b_f", "b_o", "b_g"};

void append_gru(ParamLayout& layout, const std::string& prefix, std::size_t in, std::size_t hidden) {
  for (const char* g : kGruGates) {
    Shape dims = g[0] == 'w' ? Shape{in, hidden} : g[0] == 'u' ? Shape{hidden, hidden} : Shape{hidden};
    layout.emplace_back(prefix + "." + g, std::move(dims));
  }
}

// Glorot-uniform limit for a parameter, or 0 for biases.
double glorot_limit(const std::string& name, const Shape& dims) {
  if (dims.size() == 1) return 0.0;
  double fan_in = 0.0, fan_out = 0.0;
  if (dims.size() == 5) {
    const double receptive = static_cast<double>(dims[2] * dims[3] * dims[4]);
    fan_out = static_cast<double>(dims[0]) * receptive;
    fan_in = static_cast<double>(dims[1]) * receptive;
  } else if (dims.size() == 2) {
    fan_in = static_cast<double>(dims[0]);
    fan_out = static_cast<double>(dims[1]);
  } else {
    throw ShapeError("no initializer for parameter " + name);
  }
  return std::sqrt(6.0 / (fan_in + fan_out));
}

ModelParams initialize(std::variant<LipNetConfig, AudioNetConfig> config, const ParamLayout& layout,
                       std::uint64_t seed) {
  ModelParams m{std::move(config), {}, {}};
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, dims] = layout[i];
    const double limit = glorot_limit(name, dims);
    Tensor t = limit > 0.0 ? Tensor(dims, RandomFill{derive_seed(seed, i), -limit, limit}) : Tensor(dims);
    if (!m.params.emplace(name, std::move(t)).second) throw ShapeError("duplicate parameter " + name);
  }
  return m;
}

void store_gru(ParamMap& out, const std::string& prefix, const GruParams& g) {
  const Tensor* parts[] = {&g.w_z, &g.w_r, &g.w_h, &g.u_z, &g.u_r, &g.u_h, &g.b_z, &g.b_r, &g.b_h};
  for (std::size_t i = 0; i < 9; ++i) out[prefix + "." + kGruGates[i]] = *parts[i];
}

void store_lstm(ParamMap& out, const std::string& prefix, const LstmParams& g) {
  const Tensor* parts[] = {&g.w_i, &g.w_f, &g.w_o, &g.w_g, &g.u_i, &g.u_f,
                           &g.u_o, &g.u_g, &g.b_i, &g.b_f, &g.b_o, &g.b_g};
  for (std::size_t i = 0; i < 12; ++i) out[prefix + "." + kLstmGates[i]] = *parts[i];
}

void expect_stage(const Tensor& t, const Shape& expected, const char* stage) {
  if (t.dims() != expected) {
    throw ShapeError(std::string("lipnet ") + stage + ": got " + shape_to_string(t.dims()) +
                     ", expected " + shape_to_string(expected));
  }
}

ConvWeights conv_weights(const ModelParams& m, std::size_t layer) {
  const std::string name = "conv" + std::to_string(layer + 1);
  return {m.param(name + ".kernel"), m.param(name + ".bias")};
}

const char* const kStageNames[] = {"conv1", "pool1", "conv2", "pool2", "conv3",
                                   "pool3", "features", "gru1", "gru2", "logits"};

}  // namespace

LipNetConfig LipNetConfig::shrunken(std::size_t frames, std::size_t vocab_size) {
  LipNetConfig cfg;
  cfg.frames = frames;
  cfg.in_channels = 1;
  cfg.height = 8;
  cfg.width = 8;
  cfg.conv = {{
      {2, {3, 5, 5}, {1, 1, 1}, {1, 2, 2}},
      {3, {3, 5, 5}, {1, 1, 1}, {1, 2, 2}},
      {4, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}},
  }};
  cfg.gru_hidden = 3;
  cfg.vocab_size = vocab_size;
  return cfg;
}

ConvSpec LipNetConfig::conv_spec(std::size_t layer) const {
  const ConvLayerConfig& c = conv.at(layer);
  const std::size_t in = layer == 0 ? in_channels : conv[layer - 1].channels;
  return {in, c.channels, c.kernel, c.stride, c.pad};
}

std::vector<Shape> LipNetConfig::shape_chain() const {
  if (frames == 0 || in_channels == 0 || height == 0 || width == 0) {
    throw ShapeError("lipnet config: input extents must be >= 1");
  }
  if (gru_hidden == 0) throw ShapeError("lipnet config: gru_hidden must be >= 1");
  if (vocab_size < 2) throw DomainError("lipnet config: vocab_size must be >= 2");
  std::vector<Shape> chain;
  Extent3 ext{frames, height, width};
  for (std::size_t layer = 0; layer < 3; ++layer) {
    const ConvSpec spec = conv_spec(layer);
    ext = spec.output_extents(ext);
    chain.push_back({ext.t, spec.out_channels, ext.h, ext.w});
    if (ext.t < pool.window.t || ext.h < pool.window.h || ext.w < pool.window.w) {
      throw ShapeError("lipnet config: pool window does not fit after conv" + std::to_string(layer + 1) +
                       " output " + shape_to_string(chain.back()));
    }
    ext = {(ext.t - pool.window.t) / pool.stride.t + 1, (ext.h - pool.window.h) / pool.stride.h + 1,
           (ext.w - pool.window.w) / pool.stride.w + 1};
    chain.push_back({ext.t, spec.out_channels, ext.h, ext.w});
  }
  const std::size_t t = ext.t;
  chain.push_back({t, conv[2].channels * ext.h * ext.w});
  chain.push_back({t, 2 * gru_hidden});
  chain.push_back({t, 2 * gru_hidden});
  chain.push_back({t, vocab_size});
  return chain;
}

std::size_t LipNetConfig::feature_width() const { return shape_chain()[6][1]; }

void LipNetConfig::validate() const { (void)shape_chain(); }

void AudioNetConfig::validate() const {
  if (input_coeffs == 0 || hidden == 0) throw ShapeError("audio net: sizes must be >= 1");
  if (n_classes < 2) throw DomainError("audio net: n_classes must be >= 2");
}

ParamLayout parameter_layout(const LipNetConfig& cfg) {
  cfg.validate();
  ParamLayout layout;
  for (std::size_t layer = 0; layer < 3; ++layer) {
    const ConvSpec spec = cfg.conv_spec(layer);
    const std::string name = "conv" + std::to_string(layer + 1);
    layout.emplace_back(name + ".kernel", spec.kernel_shape());
    layout.emplace_back(name + ".bias", Shape{spec.out_channels});
  }
  const std::size_t h = cfg.gru_hidden, f = cfg.feature_width();
  append_gru(layout, "gru1.fwd", f, h);
  append_gru(layout, "gru1.bwd", f, h);
  append_gru(layout, "gru2.fwd", 2 * h, h);
  append_gru(layout, "gru2.bwd", 2 * h, h);
  layout.emplace_back("linear.weight", Shape{2 * h, cfg.vocab_size});
  layout.emplace_back("linear.bias", Shape{cfg.vocab_size});
  return layout;
}

ParamLayout parameter_layout(const AudioNetConfig& cfg) {
  cfg.validate();
  ParamLayout layout;
  for (const char* g : kLstmGates) {
    Shape dims = g[0] == 'w' ? Shape{cfg.input_coeffs, cfg.hidden}
                 : g[0] == 'u' ? Shape{cfg.hidden, cfg.hidden}
                               : Shape{cfg.hidden};
    layout.emplace_back(std::string("lstm.") + g, std::move(dims));
  }
  layout.emplace_back("linear.weight", Shape{cfg.hidden, cfg.n_classes});
  layout.emplace_back("linear.bias", Shape{cfg.n_classes});
  return layout;
}

ModelKind ModelParams::kind() const noexcept {
  return std::holds_alternative<LipNetConfig>(config) ? ModelKind::LipNet : ModelKind::AudioNet;
}

const LipNetConfig& ModelParams::lipnet() const {
  if (const auto* c = std::get_if<LipNetConfig>(&config)) return *c;
  throw DomainError("model is not a lipnet model");
}

const AudioNetConfig& ModelParams::audio() const {
  if (const auto* c = std::get_if<AudioNetConfig>(&config)) return *c;
  throw DomainError("model is not an audio model");
}

ParamLayout ModelParams::layout() const {
  return std::visit([](const auto& cfg) { return parameter_layout(cfg); }, config);
}

const Tensor& ModelParams::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw DomainError("model has no parameter named " + name);
  return it->second;
}

void ModelParams::check_layout() const {
  const ParamLayout expected = layout();
  std::set<std::string> names;
  for (const auto& [name, dims] : expected) {
    names.insert(name);
    auto it = params.find(name);
    if (it == params.end()) throw ShapeError("missing parameter " + name);
    if (it->second.dims() != dims) {
      throw ShapeError("parameter " + name + " has shape " + shape_to_string(it->second.dims()) +
                       ", expected " + shape_to_string(dims));
    }
  }
  for (const auto& [name, t] : params)
    if (!names.count(name)) throw ShapeError("unexpected parameter " + name);
}

GruParams gru_params(const ParamMap& params, const std::string& prefix) {
  auto get = [&](const char* gate) -> const Tensor& {
    auto it = params.find(prefix + "." + gate);
    if (it == params.end()) throw DomainError("missing parameter " + prefix + "." + gate);
    return it->second;
  };
  return {get("w_z"), get("w_r"), get("w_h"), get("u_z"), get("u_r"),
          get("u_h"), get("b_z"), get("b_r"), get("b_h")};
}

LstmParams lstm_params(const ParamMap& params, const std::string& prefix) {
  auto get = [&](const char* gate) -> const Tensor& {
    auto it = params.find(prefix + "." + gate);
    if (it == params.end()) throw DomainError("missing parameter " + prefix + "." + gate);
    return it->second;
  };
  return {get("w_i"), get("w_f"), get("w_o"), get("w_g"), get("u_i"), get("u_f"),
          get("u_o"), get("u_g"), get("b_i"), get("b_f"), get("b_o"), get("b_g")};
}

ModelParams build_lipnet(const LipNetConfig& cfg, std::uint64_t seed) {
  return initialize(cfg, parameter_layout(cfg), seed);
}

ModelParams build_audio_net(const AudioNetConfig& cfg, std::uint64_t seed) {
  ModelParams m = initialize(cfg, parameter_layout(cfg), seed);
  m.params.at("lstm.b_f").fill(1.0);
  return m;
}

LogProbMatrix lipnet_forward(const ModelParams& m, const Tensor& video, LipNetTrace* trace) {
  const LipNetConfig& cfg = m.lipnet();
  const std::vector<Shape> chain = cfg.shape_chain();
  const Shape input_shape{cfg.frames, cfg.in_channels, cfg.height, cfg.width};
  if (video.dims() != input_shape) {
    throw ShapeError("lipnet input " + shape_to_string(video.dims()) + ", expected " +
                     shape_to_string(input_shape));
  }
  LipNetTrace local;
  LipNetTrace& tr = trace ? *trace : local;
  tr.input = video;

  const Tensor* x = &tr.input;
  for (std::size_t layer = 0; layer < 3; ++layer) {
    tr.conv[layer] = stcnn3d(*x, conv_weights(m, layer), cfg.conv_spec(layer));
    expect_stage(tr.conv[layer], chain[2 * layer], kStageNames[2 * layer]);
    tr.pooled[layer] = maxpool3d(tr.conv[layer], cfg.pool);
    expect_stage(tr.pooled[layer], chain[2 * layer + 1], kStageNames[2 * layer + 1]);
    x = &tr.pooled[layer];
  }
  tr.features = tr.pooled[2].reshaped(chain[6]);
  tr.gru1 = bigru(tr.features, gru_params(m.params, "gru1.fwd"), gru_params(m.params, "gru1.bwd"));
  expect_stage(tr.gru1, chain[7], kStageNames[7]);
  tr.gru2 = bigru(tr.gru1, gru_params(m.params, "gru2.fwd"), gru_params(m.params, "gru2.bwd"));
  expect_stage(tr.gru2, chain[8], kStageNames[8]);
  tr.logits = linear(tr.gru2, m.param("linear.weight"), m.param("linear.bias"));
  expect_stage(tr.logits, chain[9], kStageNames[9]);
  return LogProbMatrix::from_logits(tr.logits);
}

ModelGrads lipnet_backward(const ModelParams& m, const LipNetTrace& trace, const Tensor& grad_logits) {
  const LipNetConfig& cfg = m.lipnet();
  if (grad_logits.dims() != trace.logits.dims()) {
    throw ShapeError("lipnet_backward: grad_logits " + shape_to_string(grad_logits.dims()) +
                     " does not match logits " + shape_to_string(trace.logits.dims()));
  }
  ModelGrads out;
  LinearGrads lin = linear_backward(trace.gru2, m.param("linear.weight"), grad_logits);
  out.params["linear.weight"] = std::move(lin.weight);
  out.params["linear.bias"] = std::move(lin.bias);

  BiGruGrads g2 = bigru_backward(trace.gru1, gru_params(m.params, "gru2.fwd"),
                                 gru_params(m.params, "gru2.bwd"), lin.input);
  store_gru(out.params, "gru2.fwd", g2.forward);
  store_gru(out.params, "gru2.bwd", g2.backward);
  BiGruGrads g1 = bigru_backward(trace.features, gru_params(m.params, "gru1.fwd"),
                                 gru_params(m.params, "gru1.bwd"), g2.inputs);
  store_gru(out.params, "gru1.fwd", g1.forward);
  store_gru(out.params, "gru1.bwd", g1.backward);

  Tensor grad = g1.inputs.reshaped(trace.pooled[2].dims());
  for (std::size_t layer = 3; layer-- > 0;) {
    Tensor grad_conv = maxpool3d_backward(trace.conv[layer], grad, cfg.pool);
    const Tensor& layer_input = layer == 0 ? trace.input : trace.pooled[layer - 1];
    ConvGrads cg = stcnn3d_backward(layer_input, conv_weights(m, layer), cfg.conv_spec(layer), grad_conv);
    const std::string name = "conv" + std::to_string(layer + 1);
    out.params[name + ".kernel"] = std::move(cg.kernel);
    out.params[name + ".bias"] = std::move(cg.bias);
    grad = std::move(cg.input);
  }
  out.input = std::move(grad);
  return out;
}

Tensor audio_logits(const ModelParams& m, const Tensor& features) {
  const AudioNetConfig& cfg = m.audio();
  if (features.rank() != 2 || features.dim(1) != cfg.input_coeffs) {
    throw ShapeError("audio net expects T x " + std::to_string(cfg.input_coeffs) +
                     " features, got " + shape_to_string(features.dims()));
  }
  const Tensor h = lstm_last_hidden(features, lstm_params(m.params, "lstm"));
  const Tensor logits = linear(h.reshaped({1, cfg.hidden}), m.param("linear.weight"), m.param("linear.bias"));
  return logits.reshaped({cfg.n_classes});
}

Tensor audio_forward(const ModelParams& m, const Tensor& features) {
  const Tensor logits = audio_logits(m, features);
  return softmax_rows(logits.reshaped({1, logits.size()})).reshaped({logits.size()});
}

ModelGrads audio_backward(const ModelParams& m, const Tensor& features, const Tensor& grad_logits) {
  const AudioNetConfig& cfg = m.audio();
  if (grad_logits.dims() != Shape{cfg.n_classes}) throw ShapeError("audio_backward: bad grad_logits shape");
  const LstmParams lstm = lstm_params(m.params, "lstm");
  const Tensor h = lstm_last_hidden(features, lstm);
  LinearGrads lin = linear_backward(h.reshaped({1, cfg.hidden}), m.param("linear.weight"),
                                    grad_logits.reshaped({1, cfg.n_classes}));
  LstmScanGrads lg = lstm_last_hidden_backward(features, lstm, lin.input.reshaped({cfg.hidden}));
  ModelGrads out;
  out.params["linear.weight"] = std::move(lin.weight);
  out.params["linear.bias"] = std::move(lin.bias);
  store_lstm(out.params, "lstm", lg.params);
  out.input = std::move(lg.inputs);
  return out;
}

}  // namespace lipread

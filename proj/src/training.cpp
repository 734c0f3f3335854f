// SPDX-License-Identifier: Apache-2.0
#include "lipread/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace lipread {

namespace {

Tensor& param_for(ParamMap& params, const std::string& name, const Tensor& grad) {
  auto it = params.find(name);
  if (it == params.end()) throw ShapeError("gradient for unknown parameter " + name);
  if (it->second.dims() != grad.dims()) {
    throw ShapeError("gradient for " + name + " has shape " + shape_to_string(grad.dims()) +
                     ", parameter is " + shape_to_string(it->second.dims()));
  }
  return it->second;
}

Tensor& moment_for(ParamMap& moments, const std::string& name, const Shape& dims) {
  auto [it, inserted] = moments.try_emplace(name, dims);
  if (!inserted && it->second.dims() != dims) throw ShapeError("moment for " + name + " has the wrong shape");
  return it->second;
}

std::size_t argmax_lowest(const Tensor& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::size_t class_label(const Example& e, std::size_t n_classes) {
  if (e.target.size() != 1) throw DomainError("classification example needs exactly one target label");
  if (e.target[0] >= n_classes) {
    throw DomainError("class " + std::to_string(e.target[0]) + " out of range for " +
                      std::to_string(n_classes) + " classes");
  }
  return e.target[0];
}

void check_pairing(const ModelParams& model, LossKind loss) {
  const bool ok = (loss == LossKind::Ctc) == (model.kind() == ModelKind::LipNet);
  if (!ok) throw DomainError("CTC loss goes with the lipnet model, cross entropy with the audio model");
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

OptimizerState OptimizerState::sgd(double learning_rate) {
  OptimizerState s;
  s.kind = OptimizerKind::Sgd;
  s.learning_rate = learning_rate;
  return s;
}

OptimizerState OptimizerState::adam(double learning_rate) {
  OptimizerState s;
  s.learning_rate = learning_rate;
  return s;
}

double cross_entropy(const Tensor& probs, std::size_t label) {
  if (probs.rank() != 1) throw ShapeError("cross_entropy expects a probability vector");
  if (label >= probs.size()) throw DomainError("cross_entropy: label out of range");
  return -std::log(probs[label] + kProbFloor);
}

Tensor cross_entropy_grad(const Tensor& probs, std::size_t label) {
  if (probs.rank() != 1) throw ShapeError("cross_entropy_grad expects a probability vector");
  if (label >= probs.size()) throw DomainError("cross_entropy_grad: label out of range");
  Tensor g(probs.dims());
  g[label] = -1.0 / (probs[label] + kProbFloor);
  return g;
}

Tensor softmax_cross_entropy_grad(const Tensor& logits, std::size_t label) {
  if (logits.rank() != 1) throw ShapeError("softmax_cross_entropy_grad expects a logit vector");
  if (label >= logits.size()) throw DomainError("softmax_cross_entropy_grad: label out of range");
  const std::size_t n = logits.size();
  const Tensor p = softmax_rows(logits.reshaped({1, n})).reshaped({n});
  // d/dz_j of -log(p_y + floor) = -(p_y / (p_y + floor)) (delta_jy - p_j)
  const double w = p[label] / (p[label] + kProbFloor);
  Tensor g(p.dims());
  for (std::size_t j = 0; j < n; ++j) g[j] = w * (p[j] - (j == label ? 1.0 : 0.0));
  return g;
}

void sgd_step(ParamMap& params, const ParamMap& grads, double learning_rate) {
  for (const auto& [name, g] : grads) axpy(-learning_rate, g, param_for(params, name, g));
}

void adam_step(ParamMap& params, const ParamMap& grads, OptimizerState& state) {
  for (const auto& [name, g] : grads) param_for(params, name, g);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t), c2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    Tensor& m = moment_for(state.first_moment, name, g.dims());
    Tensor& v = moment_for(state.second_moment, name, g.dims());
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      p[i] -= state.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.epsilon);
    }
  }
}

void optimizer_step(ParamMap& params, const ParamMap& grads, OptimizerState& state) {
  if (state.kind == OptimizerKind::Sgd) {
    sgd_step(params, grads, state.learning_rate);
    ++state.step;
  } else {
    adam_step(params, grads, state);
  }
}

double grad_norm(const ParamMap& grads) {
  double s = 0.0;
  for (const auto& [name, g] : grads) s += dot(g, g);
  return std::sqrt(s);
}

SampleResult sample_loss_and_grad(const ModelParams& model, const Example& example, LossKind loss) {
  check_pairing(model, loss);
  SampleResult r;
  if (loss == LossKind::Ctc) {
    LipNetTrace trace;
    const LogProbMatrix lp = lipnet_forward(model, example.input, &trace);
    r.prediction = greedy_decode(lp);
    if (ctc_min_frames(example.target) > lp.frames()) {
      r.feasible = false;
      return r;
    }
    CtcResult c = ctc_loss_and_grad(lp, example.target);
    r.loss = c.loss;
    r.grads = lipnet_backward(model, trace, c.grad).params;
  } else {
    const std::size_t label = class_label(example, model.audio().n_classes);
    const Tensor logits = audio_logits(model, example.input);
    const std::size_t n = logits.size();
    const Tensor probs = softmax_rows(logits.reshaped({1, n})).reshaped({n});
    r.loss = cross_entropy(probs, label);
    r.prediction = {argmax_lowest(probs)};
    r.grads = audio_backward(model, example.input, softmax_cross_entropy_grad(logits, label)).params;
  }
  if (!std::isfinite(r.loss)) throw NonFiniteError("training loss is not finite");
  return r;
}

BatchResult batch_loss_and_grad(const ModelParams& model, std::span<const Example> batch, LossKind loss) {
  BatchResult out;
  for (const Example& e : batch) {
    SampleResult s = sample_loss_and_grad(model, e, loss);
    if (!s.feasible) {
      ++out.skipped;
      continue;
    }
    ++out.used;
    out.mean_loss += s.loss;
    if (out.grads.empty()) {
      out.grads = std::move(s.grads);
    } else {
      for (auto& [name, g] : s.grads) axpy(1.0, g, out.grads.at(name));
    }
  }
  if (out.used > 0) {
    const double inv = 1.0 / static_cast<double>(out.used);
    out.mean_loss *= inv;
    for (auto& [name, g] : out.grads)
      for (double& v : g.values()) v *= inv;
  }
  return out;
}

TrainMetrics train_epoch(ModelParams& model, const Dataset& dataset, LossKind loss, OptimizerState& opt,
                         const TrainOptions& options) {
  if (dataset.empty()) throw DomainError("train_epoch: empty dataset");
  if (options.batch_size == 0) throw DomainError("train_epoch: batch_size must be >= 1");
  check_pairing(model, loss);
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 engine(derive_seed(options.seed, options.epoch));
  std::shuffle(order.begin(), order.end(), engine);

  TrainMetrics metrics;
  metrics.epoch = options.epoch;
  double loss_sum = 0.0, rate_sum = 0.0;
  std::size_t used = 0, scored = 0;

  for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
    const std::size_t end = std::min(order.size(), begin + options.batch_size);
    ParamMap grads;
    std::size_t batch_used = 0;
    for (std::size_t k = begin; k < end; ++k) {
      const Example& e = dataset[order[k]];
      SampleResult s = sample_loss_and_grad(model, e, loss);
      if (loss == LossKind::Ctc) {
        if (!e.target.empty()) {
          rate_sum += edit_distance_rate<std::size_t>(e.target, s.prediction);
          ++scored;
        }
      } else {
        rate_sum += s.prediction[0] == e.target[0] ? 1.0 : 0.0;
        ++scored;
      }
      if (!s.feasible) {
        ++metrics.skipped;
        continue;
      }
      ++batch_used;
      loss_sum += s.loss;
      if (grads.empty()) {
        grads = std::move(s.grads);
      } else {
        for (auto& [name, g] : s.grads) axpy(1.0, g, grads.at(name));
      }
    }
    if (batch_used == 0) continue;
    used += batch_used;
    double scale = 1.0 / static_cast<double>(batch_used);
    if (options.max_grad_norm > 0.0) {
      const double norm = grad_norm(grads) * scale;
      if (norm > options.max_grad_norm) scale *= options.max_grad_norm / norm;
    }
    for (auto& [name, g] : grads)
      for (double& v : g.values()) v *= scale;
    optimizer_step(model.params, grads, opt);
  }

  if (used == 0) throw DomainError("train_epoch: every target in the dataset is infeasible");
  metrics.mean_loss = loss_sum / static_cast<double>(used);
  if (scored > 0) {
    const double rate = rate_sum / static_cast<double>(scored);
    if (loss == LossKind::Ctc) metrics.cer = rate;
    else metrics.accuracy = rate;
  }
  metrics.seconds = elapsed_seconds(start);
  return metrics;
}

TrainMetrics evaluate(const ModelParams& model, const Dataset& dataset, EvalMode mode) {
  if (dataset.empty()) throw DomainError("evaluate: empty dataset");
  const LossKind loss = mode == EvalMode::Ctc ? LossKind::Ctc : LossKind::CrossEntropy;
  check_pairing(model, loss);
  const auto start = std::chrono::steady_clock::now();
  TrainMetrics metrics;
  double loss_sum = 0.0, rate_sum = 0.0;
  std::size_t used = 0;

  for (const Example& e : dataset) {
    if (mode == EvalMode::Ctc) {
      const LogProbMatrix lp = lipnet_forward(model, e.input);
      rate_sum += edit_distance_rate<std::size_t>(e.target, greedy_decode(lp));
      if (ctc_min_frames(e.target) <= lp.frames()) {
        loss_sum += ctc_loss(lp, e.target);
        ++used;
      } else {
        ++metrics.skipped;
      }
    } else {
      const std::size_t label = class_label(e, model.audio().n_classes);
      const Tensor probs = audio_forward(model, e.input);
      rate_sum += argmax_lowest(probs) == label ? 1.0 : 0.0;
      loss_sum += cross_entropy(probs, label);
      ++used;
    }
  }
  metrics.mean_loss = used ? loss_sum / static_cast<double>(used) : std::nan("");
  const double rate = rate_sum / static_cast<double>(dataset.size());
  if (mode == EvalMode::Ctc) metrics.cer = rate;
  else metrics.accuracy = rate;
  metrics.seconds = elapsed_seconds(start);
  return metrics;
}

FitResult fit(ModelParams& model, const Dataset& train, const Dataset& validation, LossKind loss,
              OptimizerState& opt, const FitOptions& options, const EpochCallback& on_epoch) {
  const EvalMode mode = loss == LossKind::Ctc ? EvalMode::Ctc : EvalMode::Classify;
  FitResult result;
  ParamMap best = model.params;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    TrainOptions to = options.train;
    to.epoch = epoch;
    result.train.push_back(train_epoch(model, train, loss, opt, to));
    double monitored = result.train.back().mean_loss;
    if (!validation.empty()) {
      result.validation.push_back(evaluate(model, validation, mode));
      result.validation.back().epoch = epoch;
      monitored = result.validation.back().mean_loss;
    }
    if (on_epoch) on_epoch(result.train.back(), validation.empty() ? nullptr : &result.validation.back());

    if (monitored < best_loss) {
      best_loss = monitored;
      best = model.params;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }
  if (result.best_epoch > 0) model.params = std::move(best);
  return result;
}

}  // namespace lipread

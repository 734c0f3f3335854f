// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "lipread/ctc.hpp"
#include "lipread/error.hpp"
#include "lipread/models.hpp"
#include "lipread/tensor.hpp"

namespace lipread {

enum class OptimizerKind { Sgd, Adam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  // Adam moments, created lazily with the shape of their parameter.
  ParamMap first_moment;
  ParamMap second_moment;

  static OptimizerState sgd(double learning_rate);
  static OptimizerState adam(double learning_rate);
};

inline constexpr double kProbFloor = 1e-12;

/// -log(probs[label] + 1e-12).
double cross_entropy(const Tensor& probs, std::size_t label);
/// Derivative of cross_entropy with respect to each probability.
Tensor cross_entropy_grad(const Tensor& probs, std::size_t label);
/// Derivative of cross_entropy(softmax(logits), label) with respect to the
/// logits, floor included.
Tensor softmax_cross_entropy_grad(const Tensor& logits, std::size_t label);

/// p <- p - lr * g for every parameter that has a gradient.
void sgd_step(ParamMap& params, const ParamMap& grads, double learning_rate);
/// Bias-corrected Adam update; increments state.step.
void adam_step(ParamMap& params, const ParamMap& grads, OptimizerState& state);
/// Dispatches on state.kind.
void optimizer_step(ParamMap& params, const ParamMap& grads, OptimizerState& state);

/// Global L2 norm over every gradient tensor.
double grad_norm(const ParamMap& grads);

enum class LossKind { Ctc, CrossEntropy };
enum class EvalMode { Ctc, Classify };

/// One training sample. For CTC the input is a T x C x H x W clip and the
/// target a label sequence; for classification the input is a T x n_coeffs
/// feature matrix and target[0] the class index.
struct Example {
  Tensor input;
  LabelSequence target;
};

using Dataset = std::vector<Example>;

struct SampleResult {
  bool feasible = true;
  double loss = 0.0;
  ParamMap grads;
  /// Greedy transcript (CTC) or predicted class (classification).
  LabelSequence prediction;
};

/// Forward and backward pass for one sample. An infeasible CTC target is
/// reported through `feasible`, not thrown.
SampleResult sample_loss_and_grad(const ModelParams& model, const Example& example, LossKind loss);

struct BatchResult {
  double mean_loss = 0.0;
  ParamMap grads;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// Mean loss and mean gradient over the feasible samples of a batch.
BatchResult batch_loss_and_grad(const ModelParams& model, std::span<const Example> batch, LossKind loss);

struct TrainOptions {
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  /// Epoch number reported in the metrics; also salts the shuffle.
  std::size_t epoch = 0;
  /// Rescale the batch gradient to this L2 norm when exceeded; 0 disables.
  double max_grad_norm = 0.0;
};

struct TrainMetrics {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> cer;
  std::optional<double> accuracy;
  double seconds = 0.0;
  std::size_t skipped = 0;
};

/// One shuffled pass over `dataset` with an optimizer step per batch. The
/// loss and CER/accuracy are accumulated from the forward passes taken
/// before each update.
TrainMetrics train_epoch(ModelParams& model, const Dataset& dataset, LossKind loss, OptimizerState& opt,
                         const TrainOptions& options);

/// Mean loss plus CER (greedy decoding) or top-1 accuracy, lowest index
/// winning argmax ties.
TrainMetrics evaluate(const ModelParams& model, const Dataset& dataset, EvalMode mode);

struct FitOptions {
  std::size_t max_epochs = 50;
  /// Stop after this many epochs without a lower validation loss.
  std::size_t patience = 5;
  TrainOptions train;
};

struct FitResult {
  std::vector<TrainMetrics> train;
  std::vector<TrainMetrics> validation;
  std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(const TrainMetrics& train, const TrainMetrics* validation)>;

/// Trains until max_epochs or the patience runs out, then restores the
/// parameters with the lowest validation loss. Without a validation set
/// the training loss is monitored instead.
FitResult fit(ModelParams& model, const Dataset& train, const Dataset& validation, LossKind loss,
              OptimizerState& opt, const FitOptions& options, const EpochCallback& on_epoch = {});

template <typename T>
std::size_t levenshtein(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

template <typename T>
double edit_distance_rate(std::span<const T> ref, std::span<const T> hyp) {
  if (ref.empty()) throw DomainError("edit_distance_rate: empty reference");
  return static_cast<double>(levenshtein(ref, hyp)) / static_cast<double>(ref.size());
}

}  // namespace lipread

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lipread/tensor.hpp"

namespace lipread {

/// Ordered set of distinct code points plus an implicit blank at index V-1.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<char32_t> symbols);

  std::size_t size() const noexcept { return symbols_.size() + 1; }
  std::size_t blank_index() const noexcept { return symbols_.size(); }
  const std::vector<char32_t>& symbols() const noexcept { return symbols_; }

  std::optional<std::size_t> index_of(char32_t symbol) const;
  char32_t symbol(std::size_t index) const;

 private:
  std::vector<char32_t> symbols_;
};

/// Non-blank symbol indices of a transcript.
using LabelSequence = std::vector<std::size_t>;

/// T x V per-frame log-probabilities; the blank is the last column. Entries
/// may be -inf (probability zero) but never NaN or +inf, and every row must
/// log-sum-exp to 0 within `tolerance`.
class LogProbMatrix {
 public:
  explicit LogProbMatrix(Tensor values, double tolerance = 1e-6);
  /// Row-wise log-softmax of T x V logits.
  static LogProbMatrix from_logits(const Tensor& logits);

  std::size_t frames() const { return values_.dim(0); }
  std::size_t vocab_size() const { return values_.dim(1); }
  std::size_t blank() const { return values_.dim(1) - 1; }
  double at(std::size_t t, std::size_t k) const { return values_[t * values_.dim(1) + k]; }
  const Tensor& values() const noexcept { return values_; }

 private:
  Tensor values_;
};

/// Merges adjacent repeats, then drops blanks (index vocab_size - 1).
LabelSequence collapse(std::span<const std::size_t> path, std::size_t vocab_size);

/// Minimum number of frames any path for `target` needs: L plus one blank
/// between each pair of equal neighbours.
std::size_t ctc_min_frames(std::span<const std::size_t> target);

/// Negative log of the total probability of all paths that collapse to
/// `target`. Throws InfeasibleTarget if the input is too short; returns +inf
/// when every path for `target` passes through a zero-probability entry.
double ctc_loss(const LogProbMatrix& lp, std::span<const std::size_t> target);

/// Gradient of ctc_loss with respect to the logits whose log-softmax is `lp`:
/// softmax probability minus CTC state posterior, per frame and symbol.
Tensor ctc_grad(const LogProbMatrix& lp, std::span<const std::size_t> target);

struct CtcResult {
  double loss = 0.0;
  Tensor grad;
};

/// Throws NonFiniteError when the target has zero probability.
CtcResult ctc_loss_and_grad(const LogProbMatrix& lp, std::span<const std::size_t> target);

/// Per-frame argmax (lowest index wins ties), then collapse.
LabelSequence greedy_decode(const LogProbMatrix& lp);

struct BeamHypothesis {
  LabelSequence labels;
  double log_prob = 0.0;
};

/// Prefix beam search. Each live prefix carries a (blank-ending,
/// label-ending) probability pair; the two halves compete separately for the
/// `width` slots, ordered by probability, then lexicographic prefix, then
/// label-ending before blank-ending. The returned hypothesis is the prefix
/// with the largest summed probability after the last frame.
BeamHypothesis prefix_beam_search(const LogProbMatrix& lp, std::size_t width);

inline LabelSequence prefix_beam_decode(const LogProbMatrix& lp, std::size_t width) {
  return prefix_beam_search(lp, width).labels;
}

/// Brute-force CTC loss by enumerating all V^T paths. Refuses instances with
/// more than `max_paths` paths; throws InfeasibleTarget when no path
/// collapses to `target`.
double ctc_oracle(const LogProbMatrix& lp, std::span<const std::size_t> target,
                  std::size_t max_paths = std::size_t{1} << 20);

}  // namespace lipread

// SPDX-License-Identifier: Apache-2.0
#include "lipread/ctc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <unordered_set>

#include "lipread/error.hpp"

namespace lipread {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_target(const LogProbMatrix& lp, std::span<const std::size_t> target) {
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] >= lp.blank()) {
      throw DomainError("CTC target symbol " + std::to_string(target[i]) + " at position " +
                        std::to_string(i) + " is blank or out of range (V=" +
                        std::to_string(lp.vocab_size()) + ")");
    }
  }
  const std::size_t needed = ctc_min_frames(target);
  if (lp.frames() < needed) throw InfeasibleTarget(lp.frames(), needed);
}

/// Blank-interleaved target: blank, l1, blank, l2, ..., lL, blank.
std::vector<std::size_t> extend_target(std::span<const std::size_t> target, std::size_t blank) {
  std::vector<std::size_t> ext(2 * target.size() + 1, blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

bool can_skip(const std::vector<std::size_t>& ext, std::size_t s, std::size_t blank) {
  return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
}

// Log-space forward variables, T x S.
std::vector<double> forward_variables(const LogProbMatrix& lp, const std::vector<std::size_t>& ext) {
  const std::size_t frames = lp.frames(), states = ext.size(), blank = lp.blank();
  std::vector<double> alpha(frames * states, kNegInf);
  alpha[0] = lp.at(0, ext[0]);
  if (states > 1) alpha[1] = lp.at(0, ext[1]);
  for (std::size_t t = 1; t < frames; ++t) {
    const double* prev = alpha.data() + (t - 1) * states;
    double* cur = alpha.data() + t * states;
    for (std::size_t s = 0; s < states; ++s) {
      double acc = prev[s];
      if (s >= 1) acc = log_add(acc, prev[s - 1]);
      if (can_skip(ext, s, blank)) acc = log_add(acc, prev[s - 2]);
      cur[s] = acc == kNegInf ? kNegInf : acc + lp.at(t, ext[s]);
    }
  }
  return alpha;
}

// Log-space backward variables, T x S; beta[t][s] includes the emission at t.
std::vector<double> backward_variables(const LogProbMatrix& lp, const std::vector<std::size_t>& ext) {
  const std::size_t frames = lp.frames(), states = ext.size(), blank = lp.blank();
  std::vector<double> beta(frames * states, kNegInf);
  double* last = beta.data() + (frames - 1) * states;
  last[states - 1] = lp.at(frames - 1, ext[states - 1]);
  if (states > 1) last[states - 2] = lp.at(frames - 1, ext[states - 2]);
  for (std::size_t t = frames - 1; t-- > 0;) {
    const double* next = beta.data() + (t + 1) * states;
    double* cur = beta.data() + t * states;
    for (std::size_t s = 0; s < states; ++s) {
      double acc = next[s];
      if (s + 1 < states) acc = log_add(acc, next[s + 1]);
      if (s + 2 < states && can_skip(ext, s + 2, blank)) acc = log_add(acc, next[s + 2]);
      cur[s] = acc == kNegInf ? kNegInf : acc + lp.at(t, ext[s]);
    }
  }
  return beta;
}

double total_log_prob(const std::vector<double>& alpha, std::size_t frames, std::size_t states) {
  const double* last = alpha.data() + (frames - 1) * states;
  return states > 1 ? log_add(last[states - 1], last[states - 2]) : last[0];
}

}  // namespace

Vocabulary::Vocabulary(std::vector<char32_t> symbols) : symbols_(std::move(symbols)) {
  std::unordered_set<char32_t> seen;
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (!seen.insert(symbols_[i]).second) {
      throw DomainError("vocabulary symbol at index " + std::to_string(i) + " is a duplicate");
    }
  }
}

std::optional<std::size_t> Vocabulary::index_of(char32_t symbol) const {
  auto it = std::find(symbols_.begin(), symbols_.end(), symbol);
  if (it == symbols_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - symbols_.begin());
}

char32_t Vocabulary::symbol(std::size_t index) const {
  if (index >= symbols_.size()) {
    throw DomainError("index " + std::to_string(index) + " is blank or outside the vocabulary");
  }
  return symbols_[index];
}

LogProbMatrix::LogProbMatrix(Tensor values, double tolerance) : values_(std::move(values)) {
  if (values_.rank() != 2 || values_.dim(1) < 2) {
    throw ShapeError("log-prob matrix must be T x V with V >= 2, got " +
                     shape_to_string(values_.dims()));
  }
  for (std::size_t t = 0; t < values_.dim(0); ++t) {
    auto row = values_.row(t);
    for (double v : row) {
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
        throw NonFiniteError("log-prob row " + std::to_string(t) + " contains NaN or +inf");
      }
    }
    const double lse = log_sum_exp(row);
    if (!(std::abs(lse) <= tolerance)) {
      throw DomainError("log-prob row " + std::to_string(t) + " is not normalized (log-sum-exp " +
                        std::to_string(lse) + ")");
    }
  }
}

LogProbMatrix LogProbMatrix::from_logits(const Tensor& logits) {
  return LogProbMatrix(softmax_rows(logits, SoftmaxForm::Log));
}

LabelSequence collapse(std::span<const std::size_t> path, std::size_t vocab_size) {
  if (vocab_size < 2) throw DomainError("collapse needs a vocabulary with at least one symbol");
  const std::size_t blank = vocab_size - 1;
  LabelSequence out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path[i] >= vocab_size) {
      throw DomainError("path index " + std::to_string(path[i]) + " at position " +
                        std::to_string(i) + " is outside the vocabulary");
    }
    if (path[i] == blank) continue;
    if (i > 0 && path[i] == path[i - 1]) continue;
    out.push_back(path[i]);
  }
  return out;
}

std::size_t ctc_min_frames(std::span<const std::size_t> target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++n;
  return n;
}

double ctc_loss(const LogProbMatrix& lp, std::span<const std::size_t> target) {
  check_target(lp, target);
  const auto ext = extend_target(target, lp.blank());
  const auto alpha = forward_variables(lp, ext);
  const double log_p = total_log_prob(alpha, lp.frames(), ext.size());
  if (log_p == kNegInf) return std::numeric_limits<double>::infinity();
  // Rounding can push log_p a hair above zero for a certain path.
  return std::max(0.0, -log_p);
}

CtcResult ctc_loss_and_grad(const LogProbMatrix& lp, std::span<const std::size_t> target) {
  check_target(lp, target);
  const auto ext = extend_target(target, lp.blank());
  const std::size_t frames = lp.frames(), states = ext.size(), vocab = lp.vocab_size();
  const auto alpha = forward_variables(lp, ext);
  const auto beta = backward_variables(lp, ext);
  const double log_p = total_log_prob(alpha, frames, states);
  if (log_p == kNegInf) throw NonFiniteError("ctc: target has zero probability, gradient undefined");

  CtcResult result{std::max(0.0, -log_p), Tensor({frames, vocab})};
  std::vector<double> occupancy(vocab);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    for (std::size_t s = 0; s < states; ++s) {
      const double a = alpha[t * states + s], b = beta[t * states + s];
      if (a == kNegInf || b == kNegInf) continue;
      occupancy[ext[s]] = log_add(occupancy[ext[s]], a + b - lp.at(t, ext[s]));
    }
    double* g = result.grad.data() + t * vocab;
    for (std::size_t k = 0; k < vocab; ++k) {
      const double posterior = occupancy[k] == kNegInf ? 0.0 : std::exp(occupancy[k] - log_p);
      g[k] = std::exp(lp.at(t, k)) - posterior;
    }
  }
  return result;
}

Tensor ctc_grad(const LogProbMatrix& lp, std::span<const std::size_t> target) {
  return ctc_loss_and_grad(lp, target).grad;
}

LabelSequence greedy_decode(const LogProbMatrix& lp) {
  std::vector<std::size_t> path(lp.frames());
  for (std::size_t t = 0; t < lp.frames(); ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < lp.vocab_size(); ++k)
      if (lp.at(t, k) > lp.at(t, best)) best = k;
    path[t] = best;
  }
  return collapse(path, lp.vocab_size());
}

namespace {

enum Ending : std::size_t { kBlankEnding = 0, kLabelEnding = 1 };

struct BeamEntry {
  const LabelSequence* prefix;
  Ending ending;
  double log_prob;
};

bool beam_order(const BeamEntry& a, const BeamEntry& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (*a.prefix != *b.prefix) return *a.prefix < *b.prefix;
  return a.ending > b.ending;
}

using BeamTable = std::map<LabelSequence, std::array<double, 2>>;

void accumulate(BeamTable& table, const LabelSequence& prefix, Ending ending, double log_prob) {
  auto [it, inserted] = table.try_emplace(prefix, std::array<double, 2>{kNegInf, kNegInf});
  it->second[ending] = log_add(it->second[ending], log_prob);
}

}  // namespace

BeamHypothesis prefix_beam_search(const LogProbMatrix& lp, std::size_t width) {
  if (width == 0) throw DomainError("beam width must be >= 1");
  const std::size_t blank = lp.blank();
  BeamTable beam;
  beam[LabelSequence{}] = {0.0, kNegInf};

  for (std::size_t t = 0; t < lp.frames(); ++t) {
    BeamTable next;
    for (const auto& [prefix, probs] : beam) {
      for (Ending ending : {kBlankEnding, kLabelEnding}) {
        const double p = probs[ending];
        if (p == kNegInf) continue;
        accumulate(next, prefix, kBlankEnding, p + lp.at(t, blank));
        for (std::size_t c = 0; c < blank; ++c) {
          const double emit = p + lp.at(t, c);
          if (ending == kLabelEnding && !prefix.empty() && prefix.back() == c) {
            accumulate(next, prefix, kLabelEnding, emit);
          } else {
            LabelSequence extended = prefix;
            extended.push_back(c);
            accumulate(next, extended, kLabelEnding, emit);
          }
        }
      }
    }

    std::vector<BeamEntry> entries;
    for (const auto& [prefix, probs] : next)
      for (Ending ending : {kBlankEnding, kLabelEnding})
        if (probs[ending] != kNegInf) entries.push_back({&prefix, ending, probs[ending]});
    if (entries.size() > width) {
      std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(width),
                        entries.end(), beam_order);
      entries.resize(width);
    }
    BeamTable pruned;
    for (const auto& e : entries) accumulate(pruned, *e.prefix, e.ending, e.log_prob);
    beam = std::move(pruned);
  }

  BeamHypothesis best;
  bool found = false;
  for (const auto& [prefix, probs] : beam) {
    const double total = log_add(probs[kBlankEnding], probs[kLabelEnding]);
    // std::map iterates prefixes in lexicographic order, so strict > keeps
    // the smallest prefix on ties.
    if (!found || total > best.log_prob) {
      best = {prefix, total};
      found = true;
    }
  }
  return best;
}

double ctc_oracle(const LogProbMatrix& lp, std::span<const std::size_t> target,
                  std::size_t max_paths) {
  const std::size_t frames = lp.frames(), vocab = lp.vocab_size();
  std::size_t paths = 1;
  for (std::size_t t = 0; t < frames; ++t) {
    if (paths > max_paths / vocab) {
      throw DomainError("ctc_oracle: " + std::to_string(vocab) + "^" + std::to_string(frames) +
                        " paths exceeds the enumeration limit");
    }
    paths *= vocab;
  }
  for (std::size_t i = 0; i < target.size(); ++i)
    if (target[i] >= lp.blank()) throw DomainError("ctc_oracle: target contains blank or out-of-range symbol");

  const LabelSequence wanted(target.begin(), target.end());
  std::vector<std::size_t> path(frames, 0);
  double total = 0.0;
  bool matched = false;
  for (std::size_t n = 0; n < paths; ++n) {
    if (collapse(path, vocab) == wanted) {
      matched = true;
      double log_p = 0.0;
      for (std::size_t t = 0; t < frames; ++t) log_p += lp.at(t, path[t]);
      total += std::exp(log_p);
    }
    for (std::size_t t = frames; t-- > 0;) {
      if (++path[t] < vocab) break;
      path[t] = 0;
    }
  }
  if (!matched) throw InfeasibleTarget(frames, ctc_min_frames(target));
  if (total <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(total);
}

}  // namespace lipread

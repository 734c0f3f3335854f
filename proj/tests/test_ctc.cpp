// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "lipread/ctc.hpp"
#include "lipread/error.hpp"

using namespace lipread;

namespace {

constexpr std::size_t kA = 0, kB = 1;

LogProbMatrix random_lp(std::size_t T, std::size_t V, std::uint64_t seed) {
  return LogProbMatrix::from_logits(Tensor({T, V}, RandomFill{seed, -3, 3}));
}

// All paths of length T over V symbols, grouped by their collapsed string.
std::map<LabelSequence, double> enumerate_labelings(const LogProbMatrix& lp) {
  const std::size_t T = lp.frames(), V = lp.vocab_size();
  std::map<LabelSequence, double> prob;
  std::vector<std::size_t> path(T, 0);
  while (true) {
    double lp_path = 0.0;
    for (std::size_t t = 0; t < T; ++t) lp_path += lp.at(t, path[t]);
    prob[collapse(path, V)] += std::exp(lp_path);
    std::size_t t = 0;
    while (t < T && ++path[t] == V) path[t++] = 0;
    if (t == T) break;
  }
  return prob;
}

}  // namespace

TEST(Vocabulary, BlankIsLast) {
  Vocabulary v({U'a', U'b', U'c'});
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.blank_index(), 3u);
  EXPECT_EQ(v.index_of(U'b'), 1u);
  EXPECT_FALSE(v.index_of(U'z').has_value());
  EXPECT_THROW(Vocabulary({U'a', U'a'}), DomainError);
}

TEST(LogProbMatrixTest, Validation) {
  EXPECT_THROW(LogProbMatrix(Tensor({2, 3}, 0.0)), DomainError);
  Tensor bad({1, 2}, std::log(0.5));
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(LogProbMatrix{bad}, NonFiniteError);
  Tensor ok({1, 2});
  ok[0] = 0.0;
  ok[1] = -std::numeric_limits<double>::infinity();
  EXPECT_NO_THROW(LogProbMatrix{ok});
}

TEST(Collapse, AllBlank) {
  const std::size_t path[] = {2, 2, 2};
  EXPECT_TRUE(collapse(path, 3).empty());
}

TEST(Collapse, MergesRepeatsThenDropsBlanks) {
  const std::size_t p1[] = {kA, kA, 2, kA, kB, 2};
  EXPECT_EQ(collapse(p1, 3), (LabelSequence{kA, kA, kB}));
  const std::size_t p2[] = {kA, kB, kB, 2, kB};
  EXPECT_EQ(collapse(p2, 3), (LabelSequence{kA, kB, kB}));
}

TEST(Collapse, InvariantUnderDuplicatingASymbol) {
  std::mt19937_64 rng(5);
  for (int n = 0; n < 200; ++n) {
    std::vector<std::size_t> path(1 + rng() % 8);
    for (auto& s : path) s = rng() % 4;
    std::vector<std::size_t> dup = path;
    const std::size_t i = rng() % path.size();
    dup.insert(dup.begin() + static_cast<std::ptrdiff_t>(i), path[i]);
    EXPECT_EQ(collapse(path, 4), collapse(dup, 4));
  }
}

TEST(CtcMinFrames, CountsRepeats) {
  EXPECT_EQ(ctc_min_frames(LabelSequence{}), 0u);
  EXPECT_EQ(ctc_min_frames(LabelSequence{0, 1, 2}), 3u);
  EXPECT_EQ(ctc_min_frames(LabelSequence{0, 0, 1, 1}), 6u);
}

TEST(CtcLoss, SingleFrame) {
  Tensor v({1, 2});
  v[0] = std::log(0.6);
  v[1] = std::log(0.4);
  EXPECT_NEAR(ctc_loss(LogProbMatrix(v), LabelSequence{kA}), -std::log(0.6), 1e-12);
}

TEST(CtcLoss, UniformTwoFrames) {
  LogProbMatrix lp(Tensor({2, 3}, std::log(1.0 / 3.0)));
  EXPECT_NEAR(ctc_loss(lp, LabelSequence{kA}), std::log(3.0), 1e-12);
  EXPECT_NEAR(ctc_oracle(lp, LabelSequence{kA}), std::log(3.0), 1e-12);
}

TEST(CtcLoss, InfeasibleRepeatedTarget) {
  LogProbMatrix lp(Tensor({2, 3}, std::log(1.0 / 3.0)));
  EXPECT_THROW(ctc_loss(lp, LabelSequence{kA, kA}), InfeasibleTarget);
  EXPECT_THROW(ctc_oracle(lp, LabelSequence{kA, kA}), InfeasibleTarget);
  try {
    ctc_loss(lp, LabelSequence{kA, kA});
  } catch (const InfeasibleTarget& e) {
    EXPECT_EQ(e.required(), 3u);
    EXPECT_EQ(e.frames(), 2u);
  }
}

TEST(CtcLoss, RejectsBlankOrOutOfRangeLabel) {
  LogProbMatrix lp = random_lp(3, 3, 1);
  EXPECT_THROW(ctc_loss(lp, LabelSequence{2}), DomainError);
  EXPECT_THROW(ctc_loss(lp, LabelSequence{7}), DomainError);
}

TEST(CtcLoss, AgreesWithEnumeration) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    LogProbMatrix lp = random_lp(4, 3, seed);
    for (const auto& [labels, p] : enumerate_labelings(lp))
      EXPECT_NEAR(ctc_loss(lp, labels), -std::log(p), 1e-10);
  }
}

TEST(CtcLoss, HandlesZeroProbabilityEntries) {
  Tensor v({3, 3}, std::log(0.5));
  for (std::size_t t = 0; t < 3; ++t) v.at({t, kB}) = -std::numeric_limits<double>::infinity();
  LogProbMatrix lp(v);
  EXPECT_NEAR(ctc_loss(lp, LabelSequence{kA}), ctc_oracle(lp, LabelSequence{kA}), 1e-12);
  EXPECT_TRUE(std::isinf(ctc_loss(lp, LabelSequence{kB})));
  EXPECT_TRUE(std::isinf(ctc_oracle(lp, LabelSequence{kB})));
  EXPECT_THROW(ctc_grad(lp, LabelSequence{kB}), NonFiniteError);
}

TEST(CtcGrad, RowsSumToZero) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    LogProbMatrix lp = random_lp(6, 4, seed);
    Tensor g = ctc_grad(lp, LabelSequence{0, 2, 2});
    for (std::size_t t = 0; t < 6; ++t) {
      double s = 0;
      for (double v : g.row(t)) s += v;
      EXPECT_NEAR(s, 0.0, 1e-9);
    }
  }
}

TEST(CtcGrad, MatchesFiniteDifference) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Tensor logits({4, 3}, RandomFill{seed});
    const LabelSequence target{kA, kB};
    auto f = [&](const Tensor& z) { return ctc_loss(LogProbMatrix::from_logits(z), target); };
    Tensor g = ctc_grad(LogProbMatrix::from_logits(logits), target);
    EXPECT_LT(finite_diff_check(f, logits, g, 1e-4).max_relative_error, 1e-6) << "seed " << seed;
  }
}

TEST(CtcGrad, SingleFrameIsCrossEntropy) {
  Tensor logits = Tensor::matrix({{0.3, -1.2, 0.8}});
  Tensor soft = softmax_rows(logits);
  Tensor g = ctc_grad(LogProbMatrix::from_logits(logits), LabelSequence{kA});
  EXPECT_NEAR(g[0], soft[0] - 1.0, 1e-12);
  EXPECT_NEAR(g[1], soft[1], 1e-12);
  EXPECT_NEAR(g[2], soft[2], 1e-12);
}

TEST(CtcLossAndGrad, ConsistentWithSeparateCalls) {
  LogProbMatrix lp = random_lp(5, 4, 9);
  const LabelSequence target{1, 0};
  CtcResult r = ctc_loss_and_grad(lp, target);
  EXPECT_EQ(r.loss, ctc_loss(lp, target));
  EXPECT_EQ(r.grad, ctc_grad(lp, target));
}

TEST(GreedyDecode, Definition) {
  Tensor v({4, 3}, std::log(0.1));
  const std::size_t arg[] = {kA, kA, 2, kB};
  for (std::size_t t = 0; t < 4; ++t) v.at({t, arg[t]}) = std::log(0.8);
  EXPECT_EQ(greedy_decode(LogProbMatrix(v)), (LabelSequence{kA, kB}));
  Tensor blank({3, 3}, std::log(0.1));
  for (std::size_t t = 0; t < 3; ++t) blank.at({t, 2}) = std::log(0.8);
  EXPECT_TRUE(greedy_decode(LogProbMatrix(blank)).empty());
}

TEST(GreedyDecode, TiesGoToLowestIndex) {
  LogProbMatrix lp(Tensor({2, 3}, std::log(1.0 / 3.0)));
  EXPECT_EQ(greedy_decode(lp), (LabelSequence{kA}));
}

TEST(PrefixBeam, WidthOneEqualsGreedy) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    LogProbMatrix lp = random_lp(3 + seed % 6, 2 + seed % 4, seed);
    EXPECT_EQ(prefix_beam_decode(lp, 1), greedy_decode(lp)) << "seed " << seed;
  }
}

TEST(PrefixBeam, FullWidthFindsExactArgmax) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    LogProbMatrix lp = random_lp(3, 3, seed);
    auto probs = enumerate_labelings(lp);
    auto best = probs.begin();
    for (auto it = probs.begin(); it != probs.end(); ++it)
      if (it->second > best->second) best = it;
    BeamHypothesis h = prefix_beam_search(lp, 27);
    EXPECT_EQ(h.labels, best->first) << "seed " << seed;
    EXPECT_NEAR(h.log_prob, std::log(best->second), 1e-10);
  }
}

TEST(PrefixBeam, ScoreNonDecreasingInWidth) {
  std::size_t violations = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    LogProbMatrix lp = random_lp(5, 4, seed);
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t w = 1; w <= 16; w *= 2) {
      const double s = prefix_beam_search(lp, w).log_prob;
      if (s < prev - 1e-12) ++violations;
      prev = std::max(prev, s);
    }
  }
  EXPECT_EQ(violations, 0u);
}

TEST(PrefixBeam, RejectsZeroWidth) { EXPECT_THROW(prefix_beam_search(random_lp(2, 3, 1), 0), DomainError); }

TEST(CtcOracle, RefusesLargeInstances) {
  EXPECT_THROW(ctc_oracle(random_lp(12, 4, 1), LabelSequence{0}, 1000), DomainError);
}

// SPDX-License-Identifier: Apache-2.0
#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numbers>
#include <random>

namespace lipread::synthetic {

namespace {

constexpr std::size_t kSide = 8;

void put(Tensor& frame, std::size_t r, std::size_t c, double v) {
  if (r < kSide && c < kSide) frame[r * kSide + c] = v;
}

}  // namespace

Tensor pattern_frame(std::size_t symbol, std::size_t step) {
  Tensor f({1, kSide, kSide});
  const std::size_t k = step % 6;
  switch (symbol) {
    case 0:
      for (std::size_t c = 1; c < 7; ++c) put(f, 1 + k, c, 1.0);
      break;
    case 1:
      for (std::size_t r = 1; r < 7; ++r) put(f, r, 1 + k, 1.0);
      break;
    default:
      for (std::size_t d = 0; d < 4; ++d) put(f, k + d / 2, k + d % 2, 1.0);
      break;
  }
  return f;
}

Dataset moving_pattern_videos(const VideoTaskOptions& opts, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len_dist(opts.min_len, opts.max_len);
  std::uniform_int_distribution<std::size_t> sym_dist(0, 2);
  std::uniform_real_distribution<double> noise(0.0, opts.noise);
  const std::size_t plane = kSide * kSide;

  Dataset out;
  out.reserve(opts.count);
  for (std::size_t n = 0; n < opts.count; ++n) {
    const std::size_t len = len_dist(rng);
    LabelSequence target(len);
    for (auto& s : target) s = sym_dist(rng);

    // Segments of 4-5 frames separated by gaps of at least one frame; the
    // slack goes to random gaps.
    std::vector<std::size_t> seg(len);
    for (auto& s : seg) s = 4 + rng() % 2;
    std::size_t used = len - 1;
    for (std::size_t s : seg) used += s;
    std::vector<std::size_t> gap(len + 1, 0);
    for (std::size_t g = 1; g < len; ++g) gap[g] = 1;
    for (std::size_t extra = opts.frames - used; extra > 0; --extra) ++gap[rng() % (len + 1)];

    Tensor clip({opts.frames, 1, kSide, kSide});
    for (double& v : clip.values()) v = noise(rng);
    std::size_t t = 0;
    for (std::size_t i = 0; i < len; ++i) {
      t += gap[i];
      const std::size_t phase = rng() % 3;
      for (std::size_t s = 0; s < seg[i]; ++s, ++t) {
        const Tensor f = pattern_frame(target[i], phase + s);
        for (std::size_t p = 0; p < plane; ++p) clip[t * plane + p] = std::max(clip[t * plane + p], f[p]);
      }
    }
    out.push_back({std::move(clip), std::move(target)});
  }
  return out;
}

std::vector<double> tone_signature(std::size_t label, const AudioTaskOptions& opts, std::uint64_t seed) {
  // Three tones per class from a fixed grid; every class has its own
  // ordered triple.
  static constexpr double kGrid[] = {300, 450, 650, 900, 1250, 1700, 2300, 3100};
  static constexpr std::size_t kTriples[10][3] = {{0, 3, 6}, {1, 4, 7}, {2, 5, 0}, {3, 6, 1}, {4, 7, 2},
                                                  {5, 0, 3}, {6, 1, 4}, {7, 2, 5}, {0, 5, 2}, {1, 6, 3}};
  const auto& tri = kTriples[label % 10];
  const double f[3] = {kGrid[tri[0]], kGrid[tri[1]], kGrid[tri[2]]};

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.97, 1.03), gain(0.3, 0.8), onset(0.0, 0.03);
  std::normal_distribution<double> noise(0.0, opts.noise);
  const std::size_t n = static_cast<std::size_t>(opts.seconds * opts.sample_rate);
  const double start = onset(rng), seg = (opts.seconds - start) / 3.0;
  const double g = gain(rng);
  std::vector<double> x(n);
  double phase = 0.0;
  const double freq[3] = {f[0] * jitter(rng), f[1] * jitter(rng), f[2] * jitter(rng)};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / opts.sample_rate;
    double v = 0.0;
    if (t >= start) {
      const std::size_t k = std::min<std::size_t>(2, static_cast<std::size_t>((t - start) / seg));
      phase += 2.0 * std::numbers::pi * freq[k] / opts.sample_rate;
      v = g * std::sin(phase);
    }
    x[i] = std::clamp(v + noise(rng), -1.0, 1.0);
  }
  return x;
}

Dataset tone_signature_features(const AudioTaskOptions& opts, const MfccConfig& mfcc_cfg, std::uint64_t seed) {
  Dataset out;
  out.reserve(opts.classes * opts.per_class);
  for (std::size_t i = 0; i < opts.per_class; ++i) {
    for (std::size_t c = 0; c < opts.classes; ++c) {
      const auto x = tone_signature(c, opts, derive_seed(seed, i * opts.classes + c));
      out.push_back({mfcc(x, mfcc_cfg), {c}});
    }
  }
  return out;
}

std::pair<Dataset, Dataset> split(Dataset all, double held_out_fraction) {
  const auto held = static_cast<std::size_t>(std::round(static_cast<double>(all.size()) * held_out_fraction));
  Dataset test(std::make_move_iterator(all.end() - static_cast<std::ptrdiff_t>(held)),
               std::make_move_iterator(all.end()));
  all.resize(all.size() - held);
  return {std::move(all), std::move(test)};
}

}  // namespace lipread::synthetic

// SPDX-License-Identifier: Apache-2.0
// Synthetic datasets for the toy convergence tests.
#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "lipread/audio.hpp"
#include "lipread/training.hpp"

namespace lipread::synthetic {

/// Clips of 1 x 8 x 8 frames. Each symbol of the transcript is drawn for a
/// few consecutive frames as its own moving pattern: symbol 0 a horizontal
/// bar sliding down, symbol 1 a vertical bar sliding right, symbol 2 a 2x2
/// block moving along the diagonal. Frames between symbols hold only noise.
struct VideoTaskOptions {
  std::size_t count = 200;
  std::size_t frames = 20;
  std::size_t min_len = 2;
  std::size_t max_len = 3;
  double noise = 0.05;
};

Dataset moving_pattern_videos(const VideoTaskOptions& opts, std::uint64_t seed);

/// One frame (1 x 8 x 8) of `symbol`'s pattern at animation step `step`.
Tensor pattern_frame(std::size_t symbol, std::size_t step);

/// Per-class signatures of three consecutive tones with random gain,
/// frequency jitter, onset and additive noise.
struct AudioTaskOptions {
  std::size_t classes = 10;  // at most 10
  std::size_t per_class = 100;
  double sample_rate = 16000.0;
  double seconds = 0.3;
  double noise = 0.05;
};

/// Raw waveform for one draw of class `label`.
std::vector<double> tone_signature(std::size_t label, const AudioTaskOptions& opts, std::uint64_t seed);

/// MFCC features for every signal, labels in target[0], classes interleaved.
Dataset tone_signature_features(const AudioTaskOptions& opts, const MfccConfig& mfcc_cfg, std::uint64_t seed);

/// Deterministic split: the last `fraction` of the dataset is held out.
std::pair<Dataset, Dataset> split(Dataset all, double held_out_fraction);

}  // namespace lipread::synthetic

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lipread/ctc.hpp"
#include "lipread/error.hpp"
#include "lipread/models.hpp"
#include "lipread/tensor.hpp"

namespace lipread {

// Tensor files: "UVT1", u32 rank, u32 extents, f32 payload, all little-endian.

/// Writes any tensor; values are rounded to float.
void save_tensor_file(const Tensor& t, const std::filesystem::path& path);
/// Reads any UVT1 file without a range check.
Tensor load_tensor_file(const std::filesystem::path& path);
/// Reads a T x C x H x W clip and requires every value in [0, 1].
Tensor load_video_tensor(const std::filesystem::path& path);

struct WavAudio {
  std::vector<double> samples;
  std::uint32_t sample_rate = 0;
};

/// PCM 16-bit mono RIFF/WAVE only; samples divided by 32768.
WavAudio load_wav(const std::filesystem::path& path);
/// Writes PCM 16-bit mono; samples are clamped to [-1, 1) and rounded.
void save_wav(const WavAudio& audio, const std::filesystem::path& path);

/// One code point per line; a trailing '\r' is ignored. The blank is appended.
Vocabulary vocab_parse(std::string_view text);
Vocabulary vocab_load(const std::filesystem::path& path);
/// UnknownSymbol errors carry the code-point position within `text`.
LabelSequence vocab_encode(const Vocabulary& vocab, std::string_view text);
std::string vocab_decode(const Vocabulary& vocab, const LabelSequence& labels);

std::u32string utf8_decode(std::string_view text);
std::string utf8_encode(std::u32string_view text);

struct ManifestEntry {
  std::string path;
  std::string label;
};

/// "path<TAB>label" per line; blank lines and '#' comments are skipped.
std::vector<ManifestEntry> manifest_parse(std::string_view text);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes the named tensors to `path` and the config plus metadata as
/// key=value lines to `path` + ".cfg".
void checkpoint_save(const ModelParams& model, const std::filesystem::path& path);
ModelParams checkpoint_load(const std::filesystem::path& path);

using KeyValues = std::map<std::string, std::string>;

/// "key=value" lines; blank lines and '#' comments skipped, whitespace
/// around keys and values trimmed. ParseError positions are line numbers.
KeyValues parse_key_values(std::string_view text);
KeyValues load_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& kv);

/// Config keys use dotted names such as "conv1.kernel=3,5,5". Reading starts
/// from `base` and replaces whatever keys are present; unknown keys are left
/// for the caller.
void write_config(const LipNetConfig& cfg, KeyValues& out);
void write_config(const AudioNetConfig& cfg, KeyValues& out);
LipNetConfig read_lipnet_config(const KeyValues& kv, LipNetConfig base = {});
AudioNetConfig read_audio_config(const KeyValues& kv, AudioNetConfig base = {});

}  // namespace lipread

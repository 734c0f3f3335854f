// SPDX-License-Identifier: Apache-2.0
#include "lipread/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace lipread {

const char* to_string(DataErrorKind kind) noexcept {
  switch (kind) {
    case DataErrorKind::Io: return "Io";
    case DataErrorKind::BadMagic: return "BadMagic";
    case DataErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case DataErrorKind::Truncated: return "Truncated";
    case DataErrorKind::DimsOverflow: return "DimsOverflow";
    case DataErrorKind::ValueOutOfRange: return "ValueOutOfRange";
    case DataErrorKind::Unsupported: return "Unsupported";
    case DataErrorKind::ParseError: return "ParseError";
    case DataErrorKind::UnknownSymbol: return "UnknownSymbol";
    case DataErrorKind::NameCollision: return "NameCollision";
    case DataErrorKind::MissingParameter: return "MissingParameter";
    case DataErrorKind::ShapeMismatch: return "ShapeMismatch";
  }
  return "Unknown";
}

namespace {

constexpr std::size_t kMaxRank = 16;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataErrorKind::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(DataErrorKind::Io, "short write to " + path.string());
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put_f32(std::string& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw DataError(DataErrorKind::DimsOverflow, std::string(what) + " does not fit in 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

// Bounds-checked little-endian reader; every failure reports the byte offset.
class Reader {
 public:
  Reader(std::string_view bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw DataError(DataErrorKind::Truncated,
                      source_ + ": " + what + " needs " + std::to_string(n) + " bytes at offset " +
                          std::to_string(pos_) + ", " + std::to_string(remaining()) + " left",
                      pos_);
    }
  }

  std::string_view bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string_view v = bytes_.substr(pos_, n);
    pos_ += n;
    return v;
  }

  std::uint16_t u16(const char* what) {
    auto b = bytes(2, what);
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[0]) |
                                      (static_cast<unsigned char>(b[1]) << 8));
  }

  std::uint32_t u32(const char* what) {
    auto b = bytes(4, what);
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(k)]);
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  void skip(std::size_t n, const char* what) { (void)bytes(n, what); }

 private:
  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

void expect_magic(Reader& r, std::string_view magic, const std::string& source) {
  if (r.remaining() < magic.size() || r.bytes(magic.size(), "magic") != magic) {
    throw DataError(DataErrorKind::BadMagic, source + ": expected magic \"" + std::string(magic) + "\"", 0);
  }
}

// Rank and extents; rejects rank 0, zero extents and element counts that
// overflow.
Shape read_dims(Reader& r, const std::string& source) {
  const std::size_t rank_at = r.offset();
  const std::uint32_t rank = r.u32("rank");
  if (rank == 0 || rank > kMaxRank) {
    throw DataError(DataErrorKind::DimsOverflow,
                    source + ": rank " + std::to_string(rank) + " at offset " + std::to_string(rank_at) +
                        " outside 1.." + std::to_string(kMaxRank),
                    rank_at);
  }
  Shape dims(rank);
  std::size_t count = 1;
  for (std::uint32_t k = 0; k < rank; ++k) {
    const std::size_t at = r.offset();
    dims[k] = r.u32("extent");
    if (dims[k] == 0 || count > std::numeric_limits<std::size_t>::max() / 4 / dims[k]) {
      throw DataError(DataErrorKind::DimsOverflow,
                      source + ": extent " + std::to_string(dims[k]) + " at offset " + std::to_string(at) +
                          " is zero or overflows the element count",
                      at);
    }
    count *= dims[k];
  }
  return dims;
}

Tensor read_payload(Reader& r, Shape dims) {
  const std::size_t count = element_count(dims);
  r.need(count * 4, "payload");
  std::vector<double> values(count);
  for (double& v : values) v = r.f32("payload");
  return Tensor(std::move(dims), std::move(values));
}

void put_tensor_body(std::string& out, const Tensor& t) {
  if (t.rank() == 0 || t.rank() > kMaxRank) throw DataError(DataErrorKind::DimsOverflow, "cannot store rank " + std::to_string(t.rank()));
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.dims()) put_u32(out, checked_u32(d, "extent"));
  for (double v : t.values()) put_f32(out, v);
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

// Splits on '\n', dropping one trailing '\r' per line. Line numbers start at 1.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(++line_no, line);
    start = end + 1;
  }
}

std::size_t parse_size(const KeyValues& kv, const std::string& key, std::size_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::size_t v = 0;
  const std::string& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError(DataErrorKind::ParseError, "config key " + key + ": \"" + s + "\" is not an unsigned integer");
  }
  return v;
}

Extent3 parse_extent(const KeyValues& kv, const std::string& key, Extent3 fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::size_t parts[3];
  std::string_view s = it->second;
  for (int k = 0; k < 3; ++k) {
    const std::size_t comma = s.find(',');
    if ((k < 2) == (comma == std::string_view::npos)) {
      throw DataError(DataErrorKind::ParseError, "config key " + key + ": expected t,h,w");
    }
    const std::string_view part = trim(s.substr(0, comma));
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), parts[k]);
    if (ec != std::errc() || ptr != part.data() + part.size()) {
      throw DataError(DataErrorKind::ParseError, "config key " + key + ": expected t,h,w");
    }
    s = comma == std::string_view::npos ? std::string_view{} : s.substr(comma + 1);
  }
  return {parts[0], parts[1], parts[2]};
}

std::string extent_text(const Extent3& e) {
  return std::to_string(e.t) + "," + std::to_string(e.h) + "," + std::to_string(e.w);
}

}  // namespace

void save_tensor_file(const Tensor& t, const std::filesystem::path& path) {
  std::string out = "UVT1";
  out.reserve(8 + 4 * t.rank() + 4 * t.size());
  put_tensor_body(out, t);
  write_file(path, out);
}

Tensor load_tensor_file(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string source = path.string();
  Reader r(bytes, source);
  expect_magic(r, "UVT1", source);
  Shape dims = read_dims(r, source);
  Tensor t = read_payload(r, std::move(dims));
  if (r.remaining() != 0) {
    throw DataError(DataErrorKind::ParseError,
                    source + ": " + std::to_string(r.remaining()) + " trailing bytes after the payload",
                    r.offset());
  }
  return t;
}

Tensor load_video_tensor(const std::filesystem::path& path) {
  Tensor t = load_tensor_file(path);
  if (t.rank() != 4) {
    throw DataError(DataErrorKind::DimsOverflow,
                    path.string() + ": video must be T x C x H x W, got " + shape_to_string(t.dims()), 4);
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] >= 0.0 && t[i] <= 1.0)) {
      const std::size_t at = 8 + 4 * t.rank() + 4 * i;
      throw DataError(DataErrorKind::ValueOutOfRange,
                      path.string() + ": pixel " + std::to_string(i) + " at offset " + std::to_string(at) +
                          " is " + std::to_string(t[i]) + ", outside [0, 1]",
                      at);
    }
  }
  return t;
}

WavAudio load_wav(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string source = path.string();
  Reader r(bytes, source);
  if (r.remaining() < 12 || r.bytes(4, "RIFF id") != "RIFF") {
    throw DataError(DataErrorKind::BadMagic, source + ": not a RIFF file", 0);
  }
  r.u32("RIFF size");
  if (r.bytes(4, "WAVE id") != "WAVE") throw DataError(DataErrorKind::BadMagic, source + ": not a WAVE file", 8);

  WavAudio audio;
  bool have_fmt = false;
  while (r.remaining() > 0) {
    const std::size_t chunk_at = r.offset();
    const std::string_view id = r.bytes(4, "chunk id");
    const std::uint32_t size = r.u32("chunk size");
    if (id == "fmt ") {
      if (size < 16) throw DataError(DataErrorKind::Truncated, source + ": fmt chunk too short", chunk_at);
      const std::uint16_t format = r.u16("format");
      const std::uint16_t channels = r.u16("channels");
      audio.sample_rate = r.u32("sample rate");
      r.u32("byte rate");
      r.u16("block align");
      const std::uint16_t bits = r.u16("bits per sample");
      r.skip(size - 16 + (size & 1), "fmt extension");
      if (format != 1) {
        throw DataError(DataErrorKind::Unsupported,
                        source + ": encoding " + std::to_string(format) + " is not PCM", chunk_at + 8);
      }
      if (channels != 1) {
        throw DataError(DataErrorKind::Unsupported,
                        source + ": " + std::to_string(channels) + " channels, only mono is read", chunk_at + 10);
      }
      if (bits != 16) {
        throw DataError(DataErrorKind::Unsupported,
                        source + ": " + std::to_string(bits) + "-bit samples, only 16-bit is read", chunk_at + 22);
      }
      if (audio.sample_rate == 0) throw DataError(DataErrorKind::Unsupported, source + ": zero sample rate", chunk_at + 12);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError(DataErrorKind::ParseError, source + ": data chunk before fmt chunk", chunk_at);
      if (size % 2) throw DataError(DataErrorKind::Truncated, source + ": odd data size for 16-bit samples", chunk_at);
      r.need(size, "data chunk");
      audio.samples.resize(size / 2);
      for (double& s : audio.samples) {
        s = static_cast<double>(static_cast<std::int16_t>(r.u16("sample"))) / 32768.0;
      }
      return audio;
    } else {
      r.skip(size + (size & 1), "chunk body");
    }
  }
  throw DataError(DataErrorKind::Truncated, source + ": no data chunk", r.offset());
}

void save_wav(const WavAudio& audio, const std::filesystem::path& path) {
  if (audio.sample_rate == 0) throw DomainError("save_wav: sample rate must be positive");
  const std::uint32_t data_bytes = checked_u32(audio.samples.size() * 2, "wav data size");
  std::string out = "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, audio.sample_rate);
  put_u32(out, audio.sample_rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : audio.samples) {
    const double q = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0))));
  }
  write_file(path, out);
}

std::u32string utf8_decode(std::string_view text) {
  std::u32string out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xe ? 3 : (b0 >> 3) == 0x1e ? 4 : 0;
    if (len == 0 || i + len > text.size()) {
      throw DataError(DataErrorKind::ParseError, "invalid UTF-8 at byte " + std::to_string(i), i);
    }
    char32_t cp = len == 1 ? b0 : b0 & (0x7f >> len);
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xc0) != 0x80) throw DataError(DataErrorKind::ParseError, "invalid UTF-8 at byte " + std::to_string(i), i);
      cp = (cp << 6) | (b & 0x3f);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string utf8_encode(std::u32string_view text) {
  std::string out;
  for (char32_t cp : text) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
      out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
  }
  return out;
}

Vocabulary vocab_parse(std::string_view text) {
  std::vector<char32_t> symbols;
  std::size_t last_line = 0;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const std::u32string cps = utf8_decode(line);
    if (cps.size() != 1) {
      throw DataError(DataErrorKind::ParseError,
                      "vocabulary line " + std::to_string(line_no) + " must hold exactly one symbol", line_no);
    }
    symbols.push_back(cps[0]);
    last_line = line_no;
  });
  if (symbols.empty()) throw DataError(DataErrorKind::ParseError, "empty vocabulary", 0);
  try {
    return Vocabulary(std::move(symbols));
  } catch (const DomainError& e) {
    throw DataError(DataErrorKind::ParseError, e.what(), last_line);
  }
}

Vocabulary vocab_load(const std::filesystem::path& path) { return vocab_parse(read_file(path)); }

LabelSequence vocab_encode(const Vocabulary& vocab, std::string_view text) {
  const std::u32string cps = utf8_decode(text);
  LabelSequence out;
  out.reserve(cps.size());
  for (std::size_t i = 0; i < cps.size(); ++i) {
    auto idx = vocab.index_of(cps[i]);
    if (!idx) {
      throw DataError(DataErrorKind::UnknownSymbol,
                      "symbol U+" + [&] {
                        std::ostringstream os;
                        os << std::hex << std::uppercase << static_cast<std::uint32_t>(cps[i]);
                        return os.str();
                      }() + " at position " + std::to_string(i) + " is not in the vocabulary",
                      i);
    }
    out.push_back(*idx);
  }
  return out;
}

std::string vocab_decode(const Vocabulary& vocab, const LabelSequence& labels) {
  std::u32string cps;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= vocab.blank_index()) {
      throw DataError(DataErrorKind::UnknownSymbol,
                      "index " + std::to_string(labels[i]) + " at position " + std::to_string(i) +
                          " is the blank or outside the vocabulary",
                      i);
    }
    cps.push_back(vocab.symbol(labels[i]));
  }
  return utf8_encode(cps);
}

std::vector<ManifestEntry> manifest_parse(std::string_view text) {
  std::vector<ManifestEntry> entries;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (trim(line).empty() || line.front() == '#') return;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw DataError(DataErrorKind::ParseError, "manifest line " + std::to_string(line_no) + " has no TAB", line_no);
    }
    if (tab == 0) {
      throw DataError(DataErrorKind::ParseError, "manifest line " + std::to_string(line_no) + " has an empty path",
                      line_no);
    }
    entries.push_back({std::string(line.substr(0, tab)), std::string(line.substr(tab + 1))});
  });
  return entries;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  return manifest_parse(read_file(path));
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') return;
    const std::size_t eq = t.find('=');
    if (eq == std::string_view::npos || trim(t.substr(0, eq)).empty()) {
      throw DataError(DataErrorKind::ParseError, "line " + std::to_string(line_no) + " is not key=value", line_no);
    }
    const std::string key(trim(t.substr(0, eq)));
    if (!kv.emplace(key, std::string(trim(t.substr(eq + 1)))).second) {
      throw DataError(DataErrorKind::ParseError, "line " + std::to_string(line_no) + " repeats key " + key, line_no);
    }
  });
  return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) { return parse_key_values(read_file(path)); }

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

void write_config(const LipNetConfig& cfg, KeyValues& out) {
  out["model"] = "lipnet";
  out["frames"] = std::to_string(cfg.frames);
  out["in_channels"] = std::to_string(cfg.in_channels);
  out["height"] = std::to_string(cfg.height);
  out["width"] = std::to_string(cfg.width);
  for (std::size_t l = 0; l < 3; ++l) {
    const std::string p = "conv" + std::to_string(l + 1) + ".";
    out[p + "channels"] = std::to_string(cfg.conv[l].channels);
    out[p + "kernel"] = extent_text(cfg.conv[l].kernel);
    out[p + "stride"] = extent_text(cfg.conv[l].stride);
    out[p + "pad"] = extent_text(cfg.conv[l].pad);
  }
  out["pool.window"] = extent_text(cfg.pool.window);
  out["pool.stride"] = extent_text(cfg.pool.stride);
  out["gru_hidden"] = std::to_string(cfg.gru_hidden);
  out["vocab_size"] = std::to_string(cfg.vocab_size);
}

void write_config(const AudioNetConfig& cfg, KeyValues& out) {
  out["model"] = "audio";
  out["input_coeffs"] = std::to_string(cfg.input_coeffs);
  out["hidden"] = std::to_string(cfg.hidden);
  out["n_classes"] = std::to_string(cfg.n_classes);
}

LipNetConfig read_lipnet_config(const KeyValues& kv, LipNetConfig cfg) {
  cfg.frames = parse_size(kv, "frames", cfg.frames);
  cfg.in_channels = parse_size(kv, "in_channels", cfg.in_channels);
  cfg.height = parse_size(kv, "height", cfg.height);
  cfg.width = parse_size(kv, "width", cfg.width);
  for (std::size_t l = 0; l < 3; ++l) {
    const std::string p = "conv" + std::to_string(l + 1) + ".";
    cfg.conv[l].channels = parse_size(kv, p + "channels", cfg.conv[l].channels);
    cfg.conv[l].kernel = parse_extent(kv, p + "kernel", cfg.conv[l].kernel);
    cfg.conv[l].stride = parse_extent(kv, p + "stride", cfg.conv[l].stride);
    cfg.conv[l].pad = parse_extent(kv, p + "pad", cfg.conv[l].pad);
  }
  cfg.pool.window = parse_extent(kv, "pool.window", cfg.pool.window);
  cfg.pool.stride = parse_extent(kv, "pool.stride", cfg.pool.stride);
  cfg.gru_hidden = parse_size(kv, "gru_hidden", cfg.gru_hidden);
  cfg.vocab_size = parse_size(kv, "vocab_size", cfg.vocab_size);
  return cfg;
}

AudioNetConfig read_audio_config(const KeyValues& kv, AudioNetConfig cfg) {
  cfg.input_coeffs = parse_size(kv, "input_coeffs", cfg.input_coeffs);
  cfg.hidden = parse_size(kv, "hidden", cfg.hidden);
  cfg.n_classes = parse_size(kv, "n_classes", cfg.n_classes);
  return cfg;
}

void checkpoint_save(const ModelParams& model, const std::filesystem::path& path) {
  std::string out = "UCKP";
  put_u32(out, kCheckpointVersion);
  put_u32(out, checked_u32(model.params.size(), "entry count"));
  for (const auto& [name, t] : model.params) {
    put_u32(out, checked_u32(name.size(), "name length"));
    out += name;
    put_tensor_body(out, t);
  }
  write_file(path, out);

  KeyValues kv;
  std::visit([&](const auto& cfg) { write_config(cfg, kv); }, model.config);
  for (const auto& [k, v] : model.metadata) {
    if (v.find('\n') != std::string::npos) throw DomainError("metadata value for " + k + " spans lines");
    kv["meta." + k] = v;
  }
  write_file(path.string() + ".cfg", format_key_values(kv));
}

ModelParams checkpoint_load(const std::filesystem::path& path) {
  const std::string source = path.string();
  const KeyValues kv = load_key_values(source + ".cfg");
  auto model_it = kv.find("model");
  if (model_it == kv.end()) throw DataError(DataErrorKind::ParseError, source + ".cfg: no model key");
  ModelParams model;
  if (model_it->second == "lipnet") {
    model.config = read_lipnet_config(kv);
  } else if (model_it->second == "audio") {
    model.config = read_audio_config(kv);
  } else {
    throw DataError(DataErrorKind::Unsupported, source + ".cfg: unknown model \"" + model_it->second + "\"");
  }
  for (const auto& [k, v] : kv)
    if (k.rfind("meta.", 0) == 0) model.metadata[k.substr(5)] = v;

  const std::string bytes = read_file(path);
  Reader r(bytes, source);
  expect_magic(r, "UCKP", source);
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw DataError(DataErrorKind::UnsupportedVersion,
                    source + ": version " + std::to_string(version) + ", expected " +
                        std::to_string(kCheckpointVersion),
                    4);
  }
  const std::uint32_t count = r.u32("entry count");
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::size_t entry_at = r.offset();
    const std::uint32_t len = r.u32("name length");
    std::string name(r.bytes(len, "name"));
    Tensor t = read_payload(r, read_dims(r, source));
    if (!model.params.emplace(name, std::move(t)).second) {
      throw DataError(DataErrorKind::NameCollision, source + ": tensor \"" + name + "\" appears twice", entry_at);
    }
  }
  if (r.remaining() != 0) {
    throw DataError(DataErrorKind::ParseError, source + ": trailing bytes after the last entry", r.offset());
  }

  for (const auto& [name, dims] : model.layout()) {
    auto it = model.params.find(name);
    if (it == model.params.end()) {
      throw DataError(DataErrorKind::MissingParameter, source + ": missing parameter \"" + name + "\"");
    }
    if (it->second.dims() != dims) {
      throw DataError(DataErrorKind::ShapeMismatch,
                      source + ": parameter \"" + name + "\" is " + shape_to_string(it->second.dims()) +
                          ", config expects " + shape_to_string(dims));
    }
  }
  if (model.params.size() != model.layout().size()) {
    std::set<std::string> expected;
    for (const auto& [name, dims] : model.layout()) expected.insert(name);
    for (const auto& [name, t] : model.params) {
      if (!expected.count(name)) {
        throw DataError(DataErrorKind::ShapeMismatch, source + ": unexpected parameter \"" + name + "\"");
      }
    }
  }
  return model;
}

}  // namespace lipread

// SPDX-License-Identifier: Apache-2.0
#include "lipread/audio.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lipread/error.hpp"

namespace lipread {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

void MfccConfig::validate() const {
  if (!(sample_rate > 0.0)) throw DomainError("mfcc: sample_rate must be positive");
  if (!(pre_emphasis >= 0.0 && pre_emphasis < 1.0)) throw DomainError("mfcc: pre_emphasis must be in [0, 1)");
  if (frame_len < 2) throw DomainError("mfcc: frame_len must be >= 2");
  if (hop == 0) throw DomainError("mfcc: hop must be >= 1");
  if (!is_power_of_two(n_fft) || n_fft < frame_len) {
    throw DomainError("mfcc: n_fft must be a power of two >= frame_len");
  }
  if (n_filters == 0 || n_coeffs == 0 || n_coeffs > n_filters) {
    throw DomainError("mfcc: need 1 <= n_coeffs <= n_filters");
  }
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0)) {
    throw DomainError("mfcc: need 0 <= fmin < fmax <= sample_rate / 2");
  }
  if (!(log_floor > 0.0)) throw DomainError("mfcc: log_floor must be positive");
}

std::vector<double> pre_emphasis(std::span<const double> signal, double alpha) {
  if (signal.empty()) throw DomainError("pre_emphasis: empty signal");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw DomainError("pre_emphasis: alpha must be in [0, 1)");
  std::vector<double> out(signal.size());
  out[0] = signal[0];
  for (std::size_t n = 1; n < signal.size(); ++n) out[n] = signal[n] - alpha * signal[n - 1];
  return out;
}

std::vector<double> hamming_window(std::size_t length) {
  if (length < 2) throw DomainError("hamming window needs at least 2 points");
  std::vector<double> w(length);
  const double denom = static_cast<double>(length - 1);
  for (std::size_t n = 0; n < length; ++n)
    w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
  return w;
}

std::size_t frame_count(std::size_t samples, std::size_t frame_len, std::size_t hop) {
  if (samples < frame_len) {
    throw DomainError("signal of " + std::to_string(samples) + " samples is shorter than one " +
                      std::to_string(frame_len) + "-sample frame");
  }
  return 1 + (samples - frame_len) / hop;
}

Tensor frame_and_window(std::span<const double> signal, const MfccConfig& cfg) {
  cfg.validate();
  const std::size_t frames = frame_count(signal.size(), cfg.frame_len, cfg.hop);
  const auto window = hamming_window(cfg.frame_len);
  Tensor out({frames, cfg.frame_len});
  for (std::size_t t = 0; t < frames; ++t) {
    double* row = out.data() + t * cfg.frame_len;
    const double* src = signal.data() + t * cfg.hop;
    for (std::size_t n = 0; n < cfg.frame_len; ++n) row[n] = src[n] * window[n];
  }
  return out;
}

void fft_inplace(std::vector<std::complex<double>>& data) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) throw DomainError("fft length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        // Twiddles from the angle directly; a running product drifts.
        const std::complex<double> w = std::polar(1.0, angle * static_cast<double>(k));
        const std::complex<double> u = data[start + k];
        const std::complex<double> v = data[start + k + len / 2] * w;
        data[start + k] = u + v;
        data[start + k + len / 2] = u - v;
      }
    }
  }
}

Tensor power_spectrum(const Tensor& frames, std::size_t n_fft) {
  if (frames.rank() != 2) throw ShapeError("power_spectrum expects T x frame_len frames");
  if (!is_power_of_two(n_fft) || n_fft < frames.dim(1)) {
    throw DomainError("power_spectrum: n_fft must be a power of two >= frame length");
  }
  const std::size_t count = frames.dim(0), len = frames.dim(1), bins = n_fft / 2 + 1;
  Tensor out({count, bins});
  std::vector<std::complex<double>> buf(n_fft);
  for (std::size_t t = 0; t < count; ++t) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    for (std::size_t n = 0; n < len; ++n) buf[n] = frames[t * len + n];
    fft_inplace(buf);
    for (std::size_t k = 0; k < bins; ++k) out[t * bins + k] = std::norm(buf[k]) / static_cast<double>(n_fft);
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Tensor mel_filterbank(const MfccConfig& cfg) {
  cfg.validate();
  const std::size_t bins = cfg.n_fft / 2 + 1, points = cfg.n_filters + 2;
  const double mel_lo = hz_to_mel(cfg.fmin), mel_hi = hz_to_mel(cfg.fmax);
  const double hz_per_bin = cfg.sample_rate / static_cast<double>(cfg.n_fft);

  // The outer edges round outward so every bin strictly inside
  // (fmin, fmax) falls under some filter.
  std::vector<std::size_t> edge(points);
  for (std::size_t m = 0; m < points; ++m) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(m) / static_cast<double>(points - 1);
    const double bin = mel_to_hz(mel) / hz_per_bin;
    double snapped = std::round(bin);
    if (m == 0) snapped = std::floor(bin + 1e-9);
    if (m == points - 1) snapped = std::ceil(bin - 1e-9);
    edge[m] = std::min(static_cast<std::size_t>(std::max(snapped, 0.0)), bins - 1);
  }
  for (std::size_t m = 1; m < points; ++m) {
    if (edge[m] <= edge[m - 1]) {
      throw DomainError("mel_filterbank: " + std::to_string(cfg.n_filters) +
                        " filters do not fit in " + std::to_string(bins) +
                        " FFT bins (edges " + std::to_string(m - 1) + " and " + std::to_string(m) +
                        " share bin " + std::to_string(edge[m]) + ")");
    }
  }

  Tensor bank({cfg.n_filters, bins});
  for (std::size_t f = 0; f < cfg.n_filters; ++f) {
    const std::size_t left = edge[f], center = edge[f + 1], right = edge[f + 2];
    double* row = bank.data() + f * bins;
    for (std::size_t k = left + 1; k <= center; ++k)
      row[k] = static_cast<double>(k - left) / static_cast<double>(center - left);
    for (std::size_t k = center + 1; k < right; ++k)
      row[k] = static_cast<double>(right - k) / static_cast<double>(right - center);
  }
  return bank;
}

Tensor dct_matrix(std::size_t n_out, std::size_t n_in) {
  if (n_out == 0 || n_in == 0 || n_out > n_in) throw DomainError("dct_matrix: need 1 <= n_out <= n_in");
  Tensor d({n_out, n_in});
  const double n = static_cast<double>(n_in);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
    for (std::size_t i = 0; i < n_in; ++i) {
      d[k * n_in + i] = scale * std::cos(std::numbers::pi * static_cast<double>(k) *
                                         (2.0 * static_cast<double>(i) + 1.0) / (2.0 * n));
    }
  }
  return d;
}

Tensor mfcc(std::span<const double> signal, const MfccConfig& cfg) {
  cfg.validate();
  const auto emphasized = pre_emphasis(signal, cfg.pre_emphasis);
  const Tensor frames = frame_and_window(emphasized, cfg);
  const Tensor power = power_spectrum(frames, cfg.n_fft);
  Tensor energies = matmul(power, transpose(mel_filterbank(cfg)));
  for (double& e : energies.values()) e = std::log(std::max(e, cfg.log_floor));
  return matmul(energies, transpose(dct_matrix(cfg.n_coeffs, cfg.n_filters)));
}

}  // namespace lipread

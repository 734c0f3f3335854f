// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "lipread/tensor.hpp"

namespace lipread {

/// MFCC front-end parameters. Defaults: 16 kHz, 25 ms frames with a 10 ms
/// hop, 512-point FFT, 26 mel filters over 0-8000 Hz, 13 coefficients
/// including c0.
struct MfccConfig {
  double sample_rate = 16000.0;
  double pre_emphasis = 0.97;
  std::size_t frame_len = 400;
  std::size_t hop = 160;
  std::size_t n_fft = 512;
  std::size_t n_filters = 26;
  std::size_t n_coeffs = 13;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;

  /// Throws DomainError when any invariant is violated.
  void validate() const;
};

/// y[0] = x[0], y[n] = x[n] - alpha * x[n-1].
std::vector<double> pre_emphasis(std::span<const double> signal, double alpha);

/// 0.54 - 0.46 cos(2 pi n / (N - 1)).
std::vector<double> hamming_window(std::size_t length);

std::size_t frame_count(std::size_t samples, std::size_t frame_len, std::size_t hop);

/// Frames of `frame_len` samples every `hop` samples, each multiplied by a
/// Hamming window. Output is T x frame_len.
Tensor frame_and_window(std::span<const double> signal, const MfccConfig& cfg);

/// In-place radix-2 FFT; the length must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& data);

/// |X[k]|^2 / n_fft for k = 0..n_fft/2 of each zero-padded frame.
Tensor power_spectrum(const Tensor& frames, std::size_t n_fft);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters, n_filters x (n_fft/2 + 1), unit peak at each apex.
Tensor mel_filterbank(const MfccConfig& cfg);

/// Orthonormal DCT-II basis, rows = output coefficients.
Tensor dct_matrix(std::size_t n_out, std::size_t n_in);

/// T x n_coeffs cepstral features.
Tensor mfcc(std::span<const double> signal, const MfccConfig& cfg = {});

}  // namespace lipread

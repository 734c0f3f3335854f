// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

#include "lipread/tensor.hpp"

namespace lipread {

/// GRU weights. Input matrices are F x H, recurrent matrices H x H, biases H.
///
///   z  = sigmoid(x W_z + h U_z + b_z)
///   r  = sigmoid(x W_r + h U_r + b_r)
///   h~ = tanh(x W_h + (r * h) U_h + b_h)
///   h' = (1 - z) * h + z * h~
struct GruParams {
  Tensor w_z, w_r, w_h;
  Tensor u_z, u_r, u_h;
  Tensor b_z, b_r, b_h;

  static GruParams zeros(std::size_t input_size, std::size_t hidden_size);
  /// Every entry uniform in [-scale, scale).
  static GruParams random(std::size_t input_size, std::size_t hidden_size, std::uint64_t seed,
                          double scale = 0.5);

  std::size_t input_size() const { return w_z.dim(0); }
  std::size_t hidden_size() const { return w_z.dim(1); }
  void validate() const;
};

/// LSTM weights, no peepholes. Gates i, f, o use sigmoid; the candidate g
/// uses tanh.
struct LstmParams {
  Tensor w_i, w_f, w_o, w_g;
  Tensor u_i, u_f, u_o, u_g;
  Tensor b_i, b_f, b_o, b_g;

  static LstmParams zeros(std::size_t input_size, std::size_t hidden_size);
  static LstmParams random(std::size_t input_size, std::size_t hidden_size, std::uint64_t seed,
                           double scale = 0.5);

  std::size_t input_size() const { return w_i.dim(0); }
  std::size_t hidden_size() const { return w_i.dim(1); }
  void validate() const;
};

enum class ScanDirection { Forward, Reverse };

Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruParams& p);

struct GruCellGrads {
  Tensor input;
  Tensor hidden;
  GruParams params;
};

GruCellGrads gru_cell_backward(const Tensor& x, const Tensor& h_prev, const GruParams& p,
                               const Tensor& grad_h);

/// Runs the cell over the rows of `xs` (T x F). A reverse scan consumes rows
/// back to front but writes row t of the result for input row t.
Tensor gru_scan(const Tensor& xs, const GruParams& p, ScanDirection direction, const Tensor& h0);

struct GruScanGrads {
  Tensor inputs;
  Tensor h0;
  GruParams params;
};

GruScanGrads gru_scan_backward(const Tensor& xs, const GruParams& p, ScanDirection direction,
                               const Tensor& h0, const Tensor& grad_outputs);

/// Row t is [forward_t, backward_t], each H wide; zero initial states.
Tensor bigru(const Tensor& xs, const GruParams& forward, const GruParams& backward);

struct BiGruGrads {
  Tensor inputs;
  GruParams forward;
  GruParams backward;
};

BiGruGrads bigru_backward(const Tensor& xs, const GruParams& forward, const GruParams& backward,
                          const Tensor& grad_outputs);

struct LstmState {
  Tensor h;
  Tensor c;
};

LstmState lstm_cell(const Tensor& x, const LstmState& state, const LstmParams& p);

struct LstmCellGrads {
  Tensor input;
  LstmState state;
  LstmParams params;
};

LstmCellGrads lstm_cell_backward(const Tensor& x, const LstmState& state, const LstmParams& p,
                                 const Tensor& grad_h, const Tensor& grad_c);

/// Hidden state after consuming every row of `xs`, starting from zeros.
Tensor lstm_last_hidden(const Tensor& xs, const LstmParams& p);

struct LstmScanGrads {
  Tensor inputs;
  LstmParams params;
};

LstmScanGrads lstm_last_hidden_backward(const Tensor& xs, const LstmParams& p,
                                        const Tensor& grad_h);

}  // namespace lipread

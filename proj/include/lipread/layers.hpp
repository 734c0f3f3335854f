// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "lipread/tensor.hpp"

namespace lipread {

/// Extents along (time, height, width).
struct Extent3 {
  std::size_t t = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  bool operator==(const Extent3&) const = default;
};

/// floor((in + 2*pad - kernel) / stride) + 1, or ShapeError if that is < 1.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t pad);

/// Geometry of a (spatio-temporal) convolution. A temporal kernel of 1 with
/// zero temporal padding is an ordinary 2-D convolution.
struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  Extent3 kernel{1, 1, 1};
  Extent3 stride{1, 1, 1};
  Extent3 pad{0, 0, 0};

  void validate() const;
  Extent3 output_extents(const Extent3& input) const;
  /// Kernel tensor extents: C' x C x k_t x k_h x k_w.
  Shape kernel_shape() const;
};

struct ConvWeights {
  Tensor kernel;  // C' x C x k_t x k_h x k_w
  Tensor bias;    // C'

  static ConvWeights zeros(const ConvSpec& spec);
  void check(const ConvSpec& spec) const;
};

struct ConvGrads {
  Tensor input;
  Tensor kernel;
  Tensor bias;
};

/// 2-D convolution of a C x H x W input. Requires spec.kernel.t == 1.
Tensor conv2d(const Tensor& x, const ConvWeights& w, const ConvSpec& spec);
ConvGrads conv2d_backward(const Tensor& x, const ConvWeights& w, const ConvSpec& spec,
                          const Tensor& grad_output);

/// Spatio-temporal convolution of a T x C x H x W clip, zero padded on all
/// three axes. Output is T' x C' x H' x W'.
Tensor stcnn3d(const Tensor& x, const ConvWeights& w, const ConvSpec& spec);
ConvGrads stcnn3d_backward(const Tensor& x, const ConvWeights& w, const ConvSpec& spec,
                           const Tensor& grad_output);

struct PoolSpec {
  Extent3 window{1, 2, 2};
  Extent3 stride{1, 2, 2};

  bool operator==(const PoolSpec&) const = default;
};

/// Max pooling over (t, h, w) of a T x C x H x W tensor, no padding; a
/// trailing partial window is dropped.
Tensor maxpool3d(const Tensor& x, const PoolSpec& spec = {});
/// Routes each output gradient to the first maximal input of its window
/// (row-major order within the window).
Tensor maxpool3d_backward(const Tensor& x, const Tensor& grad_output, const PoolSpec& spec = {});

/// x * W + b for x of shape T x F, W of shape F x O, b of length O.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

struct LinearGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

LinearGrads linear_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_output);

}  // namespace lipread

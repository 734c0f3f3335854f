// SPDX-License-Identifier: Apache-2.0
#include "lipread/layers.hpp"

#include <algorithm>
#include <string>

#include "lipread/error.hpp"

namespace lipread {

namespace {

/// Output positions o for which o*stride + offset - pad lands inside [0, in).
struct ValidRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
};

ValidRange valid_outputs(std::size_t in, std::size_t out, std::size_t offset, std::size_t stride,
                         std::size_t pad) {
  ValidRange r;
  r.lo = offset >= pad ? 0 : (pad - offset + stride - 1) / stride;
  if (in + pad <= offset) return {0, 0};
  r.hi = std::min(out, (in - 1 + pad - offset) / stride + 1);
  if (r.lo > r.hi) r.lo = r.hi;
  return r;
}

struct PlaneGeometry {
  std::size_t in_h, in_w, out_h, out_w;
  std::size_t stride_h, stride_w, pad_h, pad_w;
};

// out[oh][ow] += weight * in[oh*sh + dh - ph][ow*sw + dw - pw] over valid taps.
void accumulate_tap(const double* in, double* out, const PlaneGeometry& g, std::size_t dh,
                    std::size_t dw, double weight) {
  const ValidRange rows = valid_outputs(g.in_h, g.out_h, dh, g.stride_h, g.pad_h);
  const ValidRange cols = valid_outputs(g.in_w, g.out_w, dw, g.stride_w, g.pad_w);
  if (cols.lo >= cols.hi) return;
  const std::size_t col0 = cols.lo * g.stride_w + dw - g.pad_w;
  for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
    const double* in_row = in + (oh * g.stride_h + dh - g.pad_h) * g.in_w + col0;
    double* out_row = out + oh * g.out_w + cols.lo;
    const std::size_t n = cols.hi - cols.lo;
    if (g.stride_w == 1) {
      for (std::size_t i = 0; i < n; ++i) out_row[i] += weight * in_row[i];
    } else {
      for (std::size_t i = 0; i < n; ++i) out_row[i] += weight * in_row[i * g.stride_w];
    }
  }
}

// Adjoint of accumulate_tap: spreads grad_out into grad_in and returns the
// weight gradient contribution.
double backprop_tap(const double* in, const double* grad_out, double* grad_in,
                    const PlaneGeometry& g, std::size_t dh, std::size_t dw, double weight) {
  const ValidRange rows = valid_outputs(g.in_h, g.out_h, dh, g.stride_h, g.pad_h);
  const ValidRange cols = valid_outputs(g.in_w, g.out_w, dw, g.stride_w, g.pad_w);
  double weight_grad = 0.0;
  if (cols.lo >= cols.hi) return weight_grad;
  const std::size_t col0 = cols.lo * g.stride_w + dw - g.pad_w;
  for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
    const std::size_t base = (oh * g.stride_h + dh - g.pad_h) * g.in_w + col0;
    const double* in_row = in + base;
    double* grad_in_row = grad_in + base;
    const double* g_row = grad_out + oh * g.out_w + cols.lo;
    for (std::size_t i = 0; i < cols.hi - cols.lo; ++i) {
      const double go = g_row[i];
      grad_in_row[i * g.stride_w] += weight * go;
      weight_grad += in_row[i * g.stride_w] * go;
    }
  }
  return weight_grad;
}

void check_input(const Tensor& x, std::size_t rank, std::size_t channel_axis,
                 const ConvSpec& spec, const char* op) {
  if (x.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + " input, got " +
                     shape_to_string(x.dims()));
  }
  if (x.dim(channel_axis) != spec.in_channels) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(x.dim(channel_axis)) +
                     " channels, spec expects " + std::to_string(spec.in_channels));
  }
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t pad) {
  if (stride == 0) throw ShapeError("stride must be >= 1");
  if (in + 2 * pad < kernel) {
    throw ShapeError("non-positive output extent: in=" + std::to_string(in) + " kernel=" +
                     std::to_string(kernel) + " pad=" + std::to_string(pad));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

void ConvSpec::validate() const {
  if (in_channels == 0 || out_channels == 0) throw ShapeError("conv channels must be >= 1");
  if (kernel.t == 0 || kernel.h == 0 || kernel.w == 0) throw ShapeError("conv kernel extents must be >= 1");
  if (stride.t == 0 || stride.h == 0 || stride.w == 0) throw ShapeError("conv strides must be >= 1");
}

Extent3 ConvSpec::output_extents(const Extent3& input) const {
  validate();
  return {conv_output_extent(input.t, kernel.t, stride.t, pad.t),
          conv_output_extent(input.h, kernel.h, stride.h, pad.h),
          conv_output_extent(input.w, kernel.w, stride.w, pad.w)};
}

Shape ConvSpec::kernel_shape() const {
  return {out_channels, in_channels, kernel.t, kernel.h, kernel.w};
}

ConvWeights ConvWeights::zeros(const ConvSpec& spec) {
  spec.validate();
  return {Tensor(spec.kernel_shape()), Tensor({spec.out_channels})};
}

void ConvWeights::check(const ConvSpec& spec) const {
  if (kernel.dims() != spec.kernel_shape()) {
    throw ShapeError("conv kernel " + shape_to_string(kernel.dims()) + " does not match spec " +
                     shape_to_string(spec.kernel_shape()));
  }
  if (bias.dims() != Shape{spec.out_channels}) {
    throw ShapeError("conv bias " + shape_to_string(bias.dims()) + " does not match " +
                     std::to_string(spec.out_channels) + " output channels");
  }
}

Tensor conv2d(const Tensor& x, const ConvWeights& w, const ConvSpec& spec) {
  spec.validate();
  if (spec.kernel.t != 1) throw ShapeError("conv2d: temporal kernel must be 1");
  check_input(x, 3, 0, spec, "conv2d");
  w.check(spec);
  const std::size_t c_in = spec.in_channels, c_out = spec.out_channels;
  const std::size_t h = x.dim(1), wd = x.dim(2);
  const Extent3 o = spec.output_extents({1, h, wd});
  const PlaneGeometry g{h, wd, o.h, o.w, spec.stride.h, spec.stride.w, spec.pad.h, spec.pad.w};
  const std::size_t kh = spec.kernel.h, kw = spec.kernel.w;

  Tensor out({c_out, o.h, o.w});
  for (std::size_t co = 0; co < c_out; ++co) {
    double* plane = out.data() + co * o.h * o.w;
    std::fill(plane, plane + o.h * o.w, w.bias[co]);
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const double* in_plane = x.data() + ci * h * wd;
      const double* k = w.kernel.data() + (co * c_in + ci) * kh * kw;
      for (std::size_t dh = 0; dh < kh; ++dh)
        for (std::size_t dw = 0; dw < kw; ++dw) accumulate_tap(in_plane, plane, g, dh, dw, k[dh * kw + dw]);
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& x, const ConvWeights& w, const ConvSpec& spec,
                          const Tensor& grad_output) {
  spec.validate();
  if (spec.kernel.t != 1) throw ShapeError("conv2d: temporal kernel must be 1");
  check_input(x, 3, 0, spec, "conv2d_backward");
  w.check(spec);
  const std::size_t c_in = spec.in_channels, c_out = spec.out_channels;
  const std::size_t h = x.dim(1), wd = x.dim(2);
  const Extent3 o = spec.output_extents({1, h, wd});
  if (grad_output.dims() != Shape{c_out, o.h, o.w}) throw ShapeError("conv2d_backward: bad grad_output shape");
  const PlaneGeometry g{h, wd, o.h, o.w, spec.stride.h, spec.stride.w, spec.pad.h, spec.pad.w};
  const std::size_t kh = spec.kernel.h, kw = spec.kernel.w;

  ConvGrads grads{Tensor(x.dims()), Tensor(w.kernel.dims()), Tensor(w.bias.dims())};
  for (std::size_t co = 0; co < c_out; ++co) {
    const double* gplane = grad_output.data() + co * o.h * o.w;
    for (std::size_t i = 0; i < o.h * o.w; ++i) grads.bias[co] += gplane[i];
    for (std::size_t ci = 0; ci < c_in; ++ci) {
      const std::size_t in_off = ci * h * wd;
      const std::size_t k_off = (co * c_in + ci) * kh * kw;
      for (std::size_t dh = 0; dh < kh; ++dh)
        for (std::size_t dw = 0; dw < kw; ++dw)
          grads.kernel[k_off + dh * kw + dw] +=
              backprop_tap(x.data() + in_off, gplane, grads.input.data() + in_off, g, dh, dw,
                           w.kernel[k_off + dh * kw + dw]);
    }
  }
  return grads;
}

Tensor stcnn3d(const Tensor& x, const ConvWeights& w, const ConvSpec& spec) {
  spec.validate();
  check_input(x, 4, 1, spec, "stcnn3d");
  w.check(spec);
  const std::size_t t_in = x.dim(0), c_in = spec.in_channels, h = x.dim(2), wd = x.dim(3);
  const std::size_t c_out = spec.out_channels;
  const Extent3 o = spec.output_extents({t_in, h, wd});
  const PlaneGeometry g{h, wd, o.h, o.w, spec.stride.h, spec.stride.w, spec.pad.h, spec.pad.w};
  const std::size_t kt = spec.kernel.t, kh = spec.kernel.h, kw = spec.kernel.w;
  const std::size_t in_plane_size = h * wd, out_plane_size = o.h * o.w;

  Tensor out({o.t, c_out, o.h, o.w});
  for (std::size_t to = 0; to < o.t; ++to) {
    for (std::size_t co = 0; co < c_out; ++co) {
      double* plane = out.data() + (to * c_out + co) * out_plane_size;
      std::fill(plane, plane + out_plane_size, w.bias[co]);
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        for (std::size_t dt = 0; dt < kt; ++dt) {
          const std::size_t shifted = to * spec.stride.t + dt;
          if (shifted < spec.pad.t || shifted - spec.pad.t >= t_in) continue;
          const std::size_t ti = shifted - spec.pad.t;
          const double* in_plane = x.data() + (ti * c_in + ci) * in_plane_size;
          const double* k = w.kernel.data() + ((co * c_in + ci) * kt + dt) * kh * kw;
          for (std::size_t dh = 0; dh < kh; ++dh)
            for (std::size_t dw = 0; dw < kw; ++dw)
              accumulate_tap(in_plane, plane, g, dh, dw, k[dh * kw + dw]);
        }
      }
    }
  }
  return out;
}

ConvGrads stcnn3d_backward(const Tensor& x, const ConvWeights& w, const ConvSpec& spec,
                           const Tensor& grad_output) {
  spec.validate();
  check_input(x, 4, 1, spec, "stcnn3d_backward");
  w.check(spec);
  const std::size_t t_in = x.dim(0), c_in = spec.in_channels, h = x.dim(2), wd = x.dim(3);
  const std::size_t c_out = spec.out_channels;
  const Extent3 o = spec.output_extents({t_in, h, wd});
  if (grad_output.dims() != Shape{o.t, c_out, o.h, o.w}) {
    throw ShapeError("stcnn3d_backward: grad_output " + shape_to_string(grad_output.dims()) +
                     " does not match output shape");
  }
  const PlaneGeometry g{h, wd, o.h, o.w, spec.stride.h, spec.stride.w, spec.pad.h, spec.pad.w};
  const std::size_t kt = spec.kernel.t, kh = spec.kernel.h, kw = spec.kernel.w;
  const std::size_t in_plane_size = h * wd, out_plane_size = o.h * o.w;

  ConvGrads grads{Tensor(x.dims()), Tensor(w.kernel.dims()), Tensor(w.bias.dims())};
  for (std::size_t to = 0; to < o.t; ++to) {
    for (std::size_t co = 0; co < c_out; ++co) {
      const double* gplane = grad_output.data() + (to * c_out + co) * out_plane_size;
      for (std::size_t i = 0; i < out_plane_size; ++i) grads.bias[co] += gplane[i];
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        for (std::size_t dt = 0; dt < kt; ++dt) {
          const std::size_t shifted = to * spec.stride.t + dt;
          if (shifted < spec.pad.t || shifted - spec.pad.t >= t_in) continue;
          const std::size_t in_off = ((shifted - spec.pad.t) * c_in + ci) * in_plane_size;
          const std::size_t k_off = ((co * c_in + ci) * kt + dt) * kh * kw;
          for (std::size_t dh = 0; dh < kh; ++dh)
            for (std::size_t dw = 0; dw < kw; ++dw)
              grads.kernel[k_off + dh * kw + dw] +=
                  backprop_tap(x.data() + in_off, gplane, grads.input.data() + in_off, g, dh, dw,
                               w.kernel[k_off + dh * kw + dw]);
        }
      }
    }
  }
  return grads;
}

namespace {

struct PoolGeometry {
  std::size_t t, c, h, w;
  Extent3 out;
};

PoolGeometry pool_geometry(const Tensor& x, const PoolSpec& spec) {
  if (x.rank() != 4) throw ShapeError("maxpool3d needs a T x C x H x W tensor, got " + shape_to_string(x.dims()));
  const Extent3& k = spec.window;
  const Extent3& s = spec.stride;
  if (k.t == 0 || k.h == 0 || k.w == 0 || s.t == 0 || s.h == 0 || s.w == 0) {
    throw ShapeError("maxpool3d: window and stride must be >= 1");
  }
  PoolGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), {}};
  if (g.t < k.t || g.h < k.h || g.w < k.w) {
    throw ShapeError("maxpool3d: input " + shape_to_string(x.dims()) + " smaller than window");
  }
  g.out = {(g.t - k.t) / s.t + 1, (g.h - k.h) / s.h + 1, (g.w - k.w) / s.w + 1};
  return g;
}

// Flat index of the first maximal element of the window feeding output
// (to, c, oh, ow).
std::size_t window_argmax(const Tensor& x, const PoolGeometry& g, const PoolSpec& spec,
                          std::size_t to, std::size_t c, std::size_t oh, std::size_t ow) {
  std::size_t best = 0;
  bool found = false;
  for (std::size_t dt = 0; dt < spec.window.t; ++dt) {
    const std::size_t ti = to * spec.stride.t + dt;
    for (std::size_t dh = 0; dh < spec.window.h; ++dh) {
      const std::size_t hi = oh * spec.stride.h + dh;
      const std::size_t row = ((ti * g.c + c) * g.h + hi) * g.w;
      for (std::size_t dw = 0; dw < spec.window.w; ++dw) {
        const std::size_t idx = row + ow * spec.stride.w + dw;
        if (!found || x[idx] > x[best]) {
          best = idx;
          found = true;
        }
      }
    }
  }
  return best;
}

}  // namespace

Tensor maxpool3d(const Tensor& x, const PoolSpec& spec) {
  const PoolGeometry g = pool_geometry(x, spec);
  Tensor out({g.out.t, g.c, g.out.h, g.out.w});
  std::size_t o = 0;
  for (std::size_t to = 0; to < g.out.t; ++to)
    for (std::size_t c = 0; c < g.c; ++c)
      for (std::size_t oh = 0; oh < g.out.h; ++oh)
        for (std::size_t ow = 0; ow < g.out.w; ++ow) out[o++] = x[window_argmax(x, g, spec, to, c, oh, ow)];
  return out;
}

Tensor maxpool3d_backward(const Tensor& x, const Tensor& grad_output, const PoolSpec& spec) {
  const PoolGeometry g = pool_geometry(x, spec);
  if (grad_output.dims() != Shape{g.out.t, g.c, g.out.h, g.out.w}) {
    throw ShapeError("maxpool3d_backward: grad_output " + shape_to_string(grad_output.dims()) +
                     " does not match pooled shape");
  }
  Tensor grad(x.dims());
  std::size_t o = 0;
  for (std::size_t to = 0; to < g.out.t; ++to)
    for (std::size_t c = 0; c < g.c; ++c)
      for (std::size_t oh = 0; oh < g.out.h; ++oh)
        for (std::size_t ow = 0; ow < g.out.w; ++ow)
          grad[window_argmax(x, g, spec, to, c, oh, ow)] += grad_output[o++];
  return grad;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || bias.dims() != Shape{weight.rank() == 2 ? weight.dim(1) : 0}) {
    throw ShapeError("linear: weight must be F x O and bias of length O");
  }
  Tensor out = matmul(x, weight);
  const std::size_t cols = weight.dim(1);
  for (std::size_t t = 0; t < out.dim(0); ++t) {
    double* r = out.data() + t * cols;
    for (std::size_t k = 0; k < cols; ++k) r[k] += bias[k];
  }
  return out;
}

LinearGrads linear_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_output) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(0) ||
      grad_output.dims() != Shape{x.dim(0), weight.dim(1)}) {
    throw ShapeError("linear_backward: inconsistent shapes");
  }
  LinearGrads grads{matmul(grad_output, transpose(weight)), matmul(transpose(x), grad_output),
                    Tensor({weight.dim(1)})};
  for (std::size_t t = 0; t < grad_output.dim(0); ++t) {
    auto r = grad_output.row(t);
    for (std::size_t k = 0; k < r.size(); ++k) grads.bias[k] += r[k];
  }
  return grads;
}

}  // namespace lipread

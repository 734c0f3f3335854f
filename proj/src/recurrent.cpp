// SPDX-License-Identifier: Apache-2.0
#include "lipread/recurrent.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lipread/error.hpp"

namespace lipread {

namespace {

// out[j] += sum_i x[i] * w[i][j]
void vec_mat_acc(const double* x, const Tensor& w, double* out) {
  const std::size_t rows = w.dim(0), cols = w.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    const double xi = x[i];
    const double* wr = w.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += xi * wr[j];
  }
}

// out[i] += sum_j w[i][j] * d[j]
void mat_vec_acc(const Tensor& w, const double* d, double* out) {
  const std::size_t rows = w.dim(0), cols = w.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* wr = w.data() + i * cols;
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += wr[j] * d[j];
    out[i] += s;
  }
}

// g[i][j] += x[i] * d[j]
void outer_acc(Tensor& g, const double* x, const double* d) {
  const std::size_t rows = g.dim(0), cols = g.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    const double xi = x[i];
    double* gr = g.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) gr[j] += xi * d[j];
  }
}

void add_to(Tensor& g, const double* d) {
  for (std::size_t j = 0; j < g.size(); ++j) g[j] += d[j];
}

void expect_shape(const Tensor& t, const Shape& dims, const char* what) {
  if (t.dims() != dims) {
    throw ShapeError(std::string(what) + ": expected " + shape_to_string(dims) + ", got " +
                     shape_to_string(t.dims()));
  }
}

void expect_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + " must be a matrix");
}

// --- GRU -------------------------------------------------------------------

struct GruStep {
  std::vector<double> z, r, cand, rh;
};

void gru_forward_step(const double* x, const double* h, const GruParams& p, GruStep& s,
                      double* h_out) {
  const std::size_t hs = p.hidden_size();
  s.z.assign(p.b_z.data(), p.b_z.data() + hs);
  s.r.assign(p.b_r.data(), p.b_r.data() + hs);
  s.cand.assign(p.b_h.data(), p.b_h.data() + hs);
  vec_mat_acc(x, p.w_z, s.z.data());
  vec_mat_acc(h, p.u_z, s.z.data());
  vec_mat_acc(x, p.w_r, s.r.data());
  vec_mat_acc(h, p.u_r, s.r.data());
  for (std::size_t j = 0; j < hs; ++j) {
    s.z[j] = sigmoid(s.z[j]);
    s.r[j] = sigmoid(s.r[j]);
  }
  s.rh.resize(hs);
  for (std::size_t j = 0; j < hs; ++j) s.rh[j] = s.r[j] * h[j];
  vec_mat_acc(x, p.w_h, s.cand.data());
  vec_mat_acc(s.rh.data(), p.u_h, s.cand.data());
  for (std::size_t j = 0; j < hs; ++j) {
    s.cand[j] = std::tanh(s.cand[j]);
    h_out[j] = (1.0 - s.z[j]) * h[j] + s.z[j] * s.cand[j];
  }
}

// Accumulates parameter gradients into `g`; writes (adds) input and previous
// hidden gradients into gx and gh_prev.
void gru_backward_step(const double* x, const double* h, const GruParams& p, const GruStep& s,
                       const double* grad_h, GruParams& g, double* gx, double* gh_prev) {
  const std::size_t hs = p.hidden_size();
  std::vector<double> da_z(hs), da_r(hs), da_h(hs), d_rh(hs, 0.0);
  for (std::size_t j = 0; j < hs; ++j) {
    const double gj = grad_h[j];
    gh_prev[j] += gj * (1.0 - s.z[j]);
    const double dz = gj * (s.cand[j] - h[j]);
    const double dcand = gj * s.z[j];
    da_z[j] = dz * s.z[j] * (1.0 - s.z[j]);
    da_h[j] = dcand * (1.0 - s.cand[j] * s.cand[j]);
  }
  outer_acc(g.w_h, x, da_h.data());
  outer_acc(g.u_h, s.rh.data(), da_h.data());
  add_to(g.b_h, da_h.data());
  mat_vec_acc(p.u_h, da_h.data(), d_rh.data());
  for (std::size_t j = 0; j < hs; ++j) {
    const double dr = d_rh[j] * h[j];
    gh_prev[j] += d_rh[j] * s.r[j];
    da_r[j] = dr * s.r[j] * (1.0 - s.r[j]);
  }
  outer_acc(g.w_z, x, da_z.data());
  outer_acc(g.u_z, h, da_z.data());
  add_to(g.b_z, da_z.data());
  outer_acc(g.w_r, x, da_r.data());
  outer_acc(g.u_r, h, da_r.data());
  add_to(g.b_r, da_r.data());
  mat_vec_acc(p.w_z, da_z.data(), gx);
  mat_vec_acc(p.w_r, da_r.data(), gx);
  mat_vec_acc(p.w_h, da_h.data(), gx);
  mat_vec_acc(p.u_z, da_z.data(), gh_prev);
  mat_vec_acc(p.u_r, da_r.data(), gh_prev);
}

void check_gru_operands(const Tensor& x, const Tensor& h, const GruParams& p) {
  p.validate();
  expect_shape(x, {p.input_size()}, "gru input");
  expect_shape(h, {p.hidden_size()}, "gru hidden state");
}

void check_scan_operands(const Tensor& xs, const GruParams& p, const Tensor& h0) {
  p.validate();
  if (xs.rank() != 2 || xs.dim(1) != p.input_size()) {
    throw ShapeError("gru_scan: inputs must be T x " + std::to_string(p.input_size()) + ", got " +
                     shape_to_string(xs.dims()));
  }
  expect_shape(h0, {p.hidden_size()}, "gru initial state");
}

std::size_t step_row(std::size_t k, std::size_t frames, ScanDirection direction) {
  return direction == ScanDirection::Forward ? k : frames - 1 - k;
}

// --- LSTM ------------------------------------------------------------------

struct LstmStep {
  std::vector<double> i, f, o, g, c, tanh_c;
};

void lstm_forward_step(const double* x, const double* h, const double* c, const LstmParams& p,
                       LstmStep& s, double* h_out) {
  const std::size_t hs = p.hidden_size();
  s.i.assign(p.b_i.data(), p.b_i.data() + hs);
  s.f.assign(p.b_f.data(), p.b_f.data() + hs);
  s.o.assign(p.b_o.data(), p.b_o.data() + hs);
  s.g.assign(p.b_g.data(), p.b_g.data() + hs);
  vec_mat_acc(x, p.w_i, s.i.data());
  vec_mat_acc(h, p.u_i, s.i.data());
  vec_mat_acc(x, p.w_f, s.f.data());
  vec_mat_acc(h, p.u_f, s.f.data());
  vec_mat_acc(x, p.w_o, s.o.data());
  vec_mat_acc(h, p.u_o, s.o.data());
  vec_mat_acc(x, p.w_g, s.g.data());
  vec_mat_acc(h, p.u_g, s.g.data());
  s.c.resize(hs);
  s.tanh_c.resize(hs);
  for (std::size_t j = 0; j < hs; ++j) {
    s.i[j] = sigmoid(s.i[j]);
    s.f[j] = sigmoid(s.f[j]);
    s.o[j] = sigmoid(s.o[j]);
    s.g[j] = std::tanh(s.g[j]);
    s.c[j] = s.f[j] * c[j] + s.i[j] * s.g[j];
    s.tanh_c[j] = std::tanh(s.c[j]);
    h_out[j] = s.o[j] * s.tanh_c[j];
  }
}

void lstm_backward_step(const double* x, const double* h, const double* c, const LstmParams& p,
                        const LstmStep& s, const double* grad_h, const double* grad_c,
                        LstmParams& g, double* gx, double* gh_prev, double* gc_prev) {
  const std::size_t hs = p.hidden_size();
  std::vector<double> da_i(hs), da_f(hs), da_o(hs), da_g(hs);
  for (std::size_t j = 0; j < hs; ++j) {
    const double dc = grad_c[j] + grad_h[j] * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
    const double d_o = grad_h[j] * s.tanh_c[j];
    gc_prev[j] += dc * s.f[j];
    da_i[j] = dc * s.g[j] * s.i[j] * (1.0 - s.i[j]);
    da_f[j] = dc * c[j] * s.f[j] * (1.0 - s.f[j]);
    da_o[j] = d_o * s.o[j] * (1.0 - s.o[j]);
    da_g[j] = dc * s.i[j] * (1.0 - s.g[j] * s.g[j]);
  }
  const std::pair<Tensor*, const std::vector<double>*> w_grads[] = {
      {&g.w_i, &da_i}, {&g.w_f, &da_f}, {&g.w_o, &da_o}, {&g.w_g, &da_g}};
  const std::pair<Tensor*, const std::vector<double>*> u_grads[] = {
      {&g.u_i, &da_i}, {&g.u_f, &da_f}, {&g.u_o, &da_o}, {&g.u_g, &da_g}};
  const std::pair<Tensor*, const std::vector<double>*> b_grads[] = {
      {&g.b_i, &da_i}, {&g.b_f, &da_f}, {&g.b_o, &da_o}, {&g.b_g, &da_g}};
  for (const auto& [t, d] : w_grads) outer_acc(*t, x, d->data());
  for (const auto& [t, d] : u_grads) outer_acc(*t, h, d->data());
  for (const auto& [t, d] : b_grads) add_to(*t, d->data());
  mat_vec_acc(p.w_i, da_i.data(), gx);
  mat_vec_acc(p.w_f, da_f.data(), gx);
  mat_vec_acc(p.w_o, da_o.data(), gx);
  mat_vec_acc(p.w_g, da_g.data(), gx);
  mat_vec_acc(p.u_i, da_i.data(), gh_prev);
  mat_vec_acc(p.u_f, da_f.data(), gh_prev);
  mat_vec_acc(p.u_o, da_o.data(), gh_prev);
  mat_vec_acc(p.u_g, da_g.data(), gh_prev);
}

void check_lstm_operands(const Tensor& x, const LstmState& state, const LstmParams& p) {
  p.validate();
  expect_shape(x, {p.input_size()}, "lstm input");
  expect_shape(state.h, {p.hidden_size()}, "lstm hidden state");
  expect_shape(state.c, {p.hidden_size()}, "lstm cell state");
}

void check_lstm_sequence(const Tensor& xs, const LstmParams& p) {
  p.validate();
  if (xs.rank() != 2 || xs.dim(1) != p.input_size()) {
    throw ShapeError("lstm: inputs must be T x " + std::to_string(p.input_size()) + ", got " +
                     shape_to_string(xs.dims()));
  }
}

}  // namespace

GruParams GruParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  const Tensor w({input_size, hidden_size}), u({hidden_size, hidden_size}), b({hidden_size});
  return {w, w, w, u, u, u, b, b, b};
}

GruParams GruParams::random(std::size_t input_size, std::size_t hidden_size, std::uint64_t seed,
                            double scale) {
  auto fill = [&](Shape dims, std::uint64_t salt) {
    return Tensor(std::move(dims), RandomFill{derive_seed(seed, salt), -scale, scale});
  };
  const Shape w{input_size, hidden_size}, u{hidden_size, hidden_size}, b{hidden_size};
  return {fill(w, 0), fill(w, 1), fill(w, 2), fill(u, 3), fill(u, 4),
          fill(u, 5), fill(b, 6), fill(b, 7), fill(b, 8)};
}

void GruParams::validate() const {
  expect_matrix(w_z, "GRU W_z");
  const Shape w{input_size(), hidden_size()}, u{hidden_size(), hidden_size()}, b{hidden_size()};
  expect_shape(w_r, w, "GRU W_r");
  expect_shape(w_h, w, "GRU W_h");
  expect_shape(u_z, u, "GRU U_z");
  expect_shape(u_r, u, "GRU U_r");
  expect_shape(u_h, u, "GRU U_h");
  expect_shape(b_z, b, "GRU b_z");
  expect_shape(b_r, b, "GRU b_r");
  expect_shape(b_h, b, "GRU b_h");
}

LstmParams LstmParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  const Tensor w({input_size, hidden_size}), u({hidden_size, hidden_size}), b({hidden_size});
  return {w, w, w, w, u, u, u, u, b, b, b, b};
}

LstmParams LstmParams::random(std::size_t input_size, std::size_t hidden_size,
                              std::uint64_t seed, double scale) {
  auto fill = [&](Shape dims, std::uint64_t salt) {
    return Tensor(std::move(dims), RandomFill{derive_seed(seed, salt), -scale, scale});
  };
  const Shape w{input_size, hidden_size}, u{hidden_size, hidden_size}, b{hidden_size};
  return {fill(w, 0), fill(w, 1), fill(w, 2),  fill(w, 3),  fill(u, 4),  fill(u, 5),
          fill(u, 6), fill(u, 7), fill(b, 8), fill(b, 9), fill(b, 10), fill(b, 11)};
}

void LstmParams::validate() const {
  expect_matrix(w_i, "LSTM W_i");
  const Shape w{input_size(), hidden_size()}, u{hidden_size(), hidden_size()}, b{hidden_size()};
  expect_shape(w_f, w, "LSTM W_f");
  expect_shape(w_o, w, "LSTM W_o");
  expect_shape(w_g, w, "LSTM W_g");
  expect_shape(u_i, u, "LSTM U_i");
  expect_shape(u_f, u, "LSTM U_f");
  expect_shape(u_o, u, "LSTM U_o");
  expect_shape(u_g, u, "LSTM U_g");
  expect_shape(b_i, b, "LSTM b_i");
  expect_shape(b_f, b, "LSTM b_f");
  expect_shape(b_o, b, "LSTM b_o");
  expect_shape(b_g, b, "LSTM b_g");
}

Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruParams& p) {
  check_gru_operands(x, h_prev, p);
  Tensor h({p.hidden_size()});
  GruStep s;
  gru_forward_step(x.data(), h_prev.data(), p, s, h.data());
  return h;
}

GruCellGrads gru_cell_backward(const Tensor& x, const Tensor& h_prev, const GruParams& p,
                               const Tensor& grad_h) {
  check_gru_operands(x, h_prev, p);
  expect_shape(grad_h, {p.hidden_size()}, "gru grad_h");
  GruStep s;
  Tensor h({p.hidden_size()});
  gru_forward_step(x.data(), h_prev.data(), p, s, h.data());
  GruCellGrads grads{Tensor(x.dims()), Tensor(h_prev.dims()),
                     GruParams::zeros(p.input_size(), p.hidden_size())};
  gru_backward_step(x.data(), h_prev.data(), p, s, grad_h.data(), grads.params,
                    grads.input.data(), grads.hidden.data());
  return grads;
}

Tensor gru_scan(const Tensor& xs, const GruParams& p, ScanDirection direction, const Tensor& h0) {
  check_scan_operands(xs, p, h0);
  const std::size_t frames = xs.dim(0), f = p.input_size(), hs = p.hidden_size();
  Tensor out({frames, hs});
  GruStep s;
  const double* h = h0.data();
  for (std::size_t k = 0; k < frames; ++k) {
    const std::size_t t = step_row(k, frames, direction);
    gru_forward_step(xs.data() + t * f, h, p, s, out.data() + t * hs);
    h = out.data() + t * hs;
  }
  return out;
}

GruScanGrads gru_scan_backward(const Tensor& xs, const GruParams& p, ScanDirection direction,
                               const Tensor& h0, const Tensor& grad_outputs) {
  check_scan_operands(xs, p, h0);
  const std::size_t frames = xs.dim(0), f = p.input_size(), hs = p.hidden_size();
  expect_shape(grad_outputs, {frames, hs}, "gru_scan grad_outputs");

  Tensor states({frames, hs});
  std::vector<GruStep> steps(frames);
  const double* h = h0.data();
  for (std::size_t k = 0; k < frames; ++k) {
    const std::size_t t = step_row(k, frames, direction);
    gru_forward_step(xs.data() + t * f, h, p, steps[k], states.data() + t * hs);
    h = states.data() + t * hs;
  }

  GruScanGrads grads{Tensor(xs.dims()), Tensor({hs}), GruParams::zeros(f, hs)};
  std::vector<double> carry(hs, 0.0), grad_h(hs);
  for (std::size_t k = frames; k-- > 0;) {
    const std::size_t t = step_row(k, frames, direction);
    const double* h_prev = k == 0 ? h0.data() : states.data() + step_row(k - 1, frames, direction) * hs;
    for (std::size_t j = 0; j < hs; ++j) grad_h[j] = grad_outputs[t * hs + j] + carry[j];
    std::fill(carry.begin(), carry.end(), 0.0);
    gru_backward_step(xs.data() + t * f, h_prev, p, steps[k], grad_h.data(), grads.params,
                      grads.inputs.data() + t * f, carry.data());
  }
  for (std::size_t j = 0; j < hs; ++j) grads.h0[j] = carry[j];
  return grads;
}

namespace {

void check_bigru(const GruParams& forward, const GruParams& backward) {
  forward.validate();
  backward.validate();
  if (forward.input_size() != backward.input_size() ||
      forward.hidden_size() != backward.hidden_size()) {
    throw ShapeError("bigru: forward and backward parameters disagree on F or H");
  }
}

}  // namespace

Tensor bigru(const Tensor& xs, const GruParams& forward, const GruParams& backward) {
  check_bigru(forward, backward);
  const std::size_t hs = forward.hidden_size();
  const Tensor h0({hs});
  const Tensor fw = gru_scan(xs, forward, ScanDirection::Forward, h0);
  const Tensor bw = gru_scan(xs, backward, ScanDirection::Reverse, h0);
  const std::size_t frames = xs.dim(0);
  Tensor out({frames, 2 * hs});
  for (std::size_t t = 0; t < frames; ++t) {
    std::copy_n(fw.data() + t * hs, hs, out.data() + t * 2 * hs);
    std::copy_n(bw.data() + t * hs, hs, out.data() + t * 2 * hs + hs);
  }
  return out;
}

BiGruGrads bigru_backward(const Tensor& xs, const GruParams& forward, const GruParams& backward,
                          const Tensor& grad_outputs) {
  check_bigru(forward, backward);
  const std::size_t hs = forward.hidden_size();
  if (xs.rank() != 2) throw ShapeError("bigru_backward: inputs must be a matrix");
  const std::size_t frames = xs.dim(0);
  expect_shape(grad_outputs, {frames, 2 * hs}, "bigru grad_outputs");
  Tensor g_fw({frames, hs}), g_bw({frames, hs});
  for (std::size_t t = 0; t < frames; ++t) {
    std::copy_n(grad_outputs.data() + t * 2 * hs, hs, g_fw.data() + t * hs);
    std::copy_n(grad_outputs.data() + t * 2 * hs + hs, hs, g_bw.data() + t * hs);
  }
  const Tensor h0({hs});
  GruScanGrads fw = gru_scan_backward(xs, forward, ScanDirection::Forward, h0, g_fw);
  GruScanGrads bw = gru_scan_backward(xs, backward, ScanDirection::Reverse, h0, g_bw);
  axpy(1.0, bw.inputs, fw.inputs);
  return {std::move(fw.inputs), std::move(fw.params), std::move(bw.params)};
}

LstmState lstm_cell(const Tensor& x, const LstmState& state, const LstmParams& p) {
  check_lstm_operands(x, state, p);
  LstmStep s;
  LstmState next{Tensor({p.hidden_size()}), Tensor({p.hidden_size()})};
  lstm_forward_step(x.data(), state.h.data(), state.c.data(), p, s, next.h.data());
  std::copy(s.c.begin(), s.c.end(), next.c.data());
  return next;
}

LstmCellGrads lstm_cell_backward(const Tensor& x, const LstmState& state, const LstmParams& p,
                                 const Tensor& grad_h, const Tensor& grad_c) {
  check_lstm_operands(x, state, p);
  expect_shape(grad_h, {p.hidden_size()}, "lstm grad_h");
  expect_shape(grad_c, {p.hidden_size()}, "lstm grad_c");
  LstmStep s;
  Tensor h({p.hidden_size()});
  lstm_forward_step(x.data(), state.h.data(), state.c.data(), p, s, h.data());
  LstmCellGrads grads{Tensor(x.dims()),
                      {Tensor({p.hidden_size()}), Tensor({p.hidden_size()})},
                      LstmParams::zeros(p.input_size(), p.hidden_size())};
  lstm_backward_step(x.data(), state.h.data(), state.c.data(), p, s, grad_h.data(), grad_c.data(),
                     grads.params, grads.input.data(), grads.state.h.data(),
                     grads.state.c.data());
  return grads;
}

Tensor lstm_last_hidden(const Tensor& xs, const LstmParams& p) {
  check_lstm_sequence(xs, p);
  const std::size_t frames = xs.dim(0), f = p.input_size(), hs = p.hidden_size();
  std::vector<double> h(hs, 0.0), c(hs, 0.0), h_next(hs);
  LstmStep s;
  for (std::size_t t = 0; t < frames; ++t) {
    lstm_forward_step(xs.data() + t * f, h.data(), c.data(), p, s, h_next.data());
    h.swap(h_next);
    c = s.c;
  }
  return Tensor({hs}, std::move(h));
}

LstmScanGrads lstm_last_hidden_backward(const Tensor& xs, const LstmParams& p,
                                        const Tensor& grad_h) {
  check_lstm_sequence(xs, p);
  const std::size_t frames = xs.dim(0), f = p.input_size(), hs = p.hidden_size();
  expect_shape(grad_h, {hs}, "lstm grad_h");

  // hstates[t], cstates[t] hold the state entering step t.
  std::vector<std::vector<double>> hstates(frames + 1, std::vector<double>(hs, 0.0));
  std::vector<std::vector<double>> cstates(frames + 1, std::vector<double>(hs, 0.0));
  std::vector<LstmStep> steps(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    lstm_forward_step(xs.data() + t * f, hstates[t].data(), cstates[t].data(), p, steps[t],
                      hstates[t + 1].data());
    cstates[t + 1] = steps[t].c;
  }

  LstmScanGrads grads{Tensor(xs.dims()), LstmParams::zeros(f, hs)};
  std::vector<double> gh(grad_h.values().begin(), grad_h.values().end()), gc(hs, 0.0);
  std::vector<double> gh_prev(hs), gc_prev(hs);
  for (std::size_t t = frames; t-- > 0;) {
    std::fill(gh_prev.begin(), gh_prev.end(), 0.0);
    std::fill(gc_prev.begin(), gc_prev.end(), 0.0);
    lstm_backward_step(xs.data() + t * f, hstates[t].data(), cstates[t].data(), p, steps[t],
                       gh.data(), gc.data(), grads.params, grads.inputs.data() + t * f,
                       gh_prev.data(), gc_prev.data());
    gh.swap(gh_prev);
    gc.swap(gc_prev);
  }
  return grads;
}

}  // namespace lipread

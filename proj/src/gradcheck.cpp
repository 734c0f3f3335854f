// SPDX-License-Identifier: Apache-2.0
#include "lipread/gradcheck.hpp"

#include <functional>
#include <utility>

#include "lipread/ctc.hpp"
#include "lipread/layers.hpp"
#include "lipread/models.hpp"
#include "lipread/recurrent.hpp"
#include "lipread/training.hpp"

namespace lipread {

namespace {

constexpr double kOpTolerance = 1e-6;
constexpr double kModelTolerance = 1e-5;
// Step sizes. Convolutions and the linear layer are linear in each argument,
// so a large step has no truncation error and the least rounding noise.
// Smooth nonlinear ops use a middle step; max pooling keeps a tiny one so a
// probe never changes which element wins a window.
constexpr double kEps = 1e-6;
constexpr double kLinearEps = 1e-3;
constexpr double kSmoothEps = 1e-4;

struct Arg {
  Tensor* value;
  Tensor analytic;
  double eps = 0.0;  // 0: the step passed to check_args
};

// Checks each argument in turn; `f` reads the arguments through the
// pointers, so the probe is swapped in and restored around each call.
GradReport check_args(const std::function<double()>& f, std::vector<Arg> args, double eps) {
  GradReport worst;
  bool first = true;
  for (Arg& a : args) {
    const Tensor original = *a.value;
    const ScalarFunction probe = [&](const Tensor& x) {
      *a.value = x;
      const double v = f();
      *a.value = original;
      return v;
    };
    const GradReport r = finite_diff_check(probe, original, a.analytic, a.eps > 0.0 ? a.eps : eps);
    if (first || r.max_relative_error > worst.max_relative_error) worst = r;
    first = false;
  }
  return worst;
}

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_seed() { return derive_seed(seed_, counter_++); }

  Tensor random(Shape dims, double scale = 1.0) {
    return Tensor(std::move(dims), RandomFill{next_seed(), -scale, scale});
  }

  std::vector<GradCheckEntry> entries;

  void add(std::string name, GradReport r, double tol = kOpTolerance) {
    entries.push_back({std::move(name), r, tol});
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

void check_conv2d(Suite& s) {
  const ConvSpec spec{2, 3, {1, 3, 3}, {1, 2, 1}, {0, 1, 1}};
  Tensor x = s.random({2, 5, 6});
  ConvWeights w{s.random(spec.kernel_shape()), s.random({3})};
  const Tensor proj = s.random({3, 3, 6});
  const auto f = [&] { return dot(proj, conv2d(x, w, spec)); };
  ConvGrads g = conv2d_backward(x, w, spec, proj);
  s.add("conv2d", check_args(f, {{&x, g.input}, {&w.kernel, g.kernel}, {&w.bias, g.bias}}, kLinearEps));
}

void check_stcnn3d(Suite& s) {
  const ConvSpec spec{2, 3, {3, 3, 3}, {1, 2, 2}, {1, 1, 1}};
  Tensor x = s.random({4, 2, 5, 5});
  ConvWeights w{s.random(spec.kernel_shape()), s.random({3})};
  const Tensor proj = s.random({4, 3, 3, 3});
  const auto f = [&] { return dot(proj, stcnn3d(x, w, spec)); };
  ConvGrads g = stcnn3d_backward(x, w, spec, proj);
  s.add("stcnn3d", check_args(f, {{&x, g.input}, {&w.kernel, g.kernel}, {&w.bias, g.bias}}, kLinearEps));
}

void check_maxpool3d(Suite& s) {
  Tensor x = s.random({3, 2, 6, 4});
  const Tensor proj = s.random({3, 2, 3, 2});
  const auto f = [&] { return dot(proj, maxpool3d(x)); };
  s.add("maxpool3d", check_args(f, {{&x, maxpool3d_backward(x, proj)}}, kEps));
}

void check_linear(Suite& s) {
  Tensor x = s.random({4, 5}), w = s.random({5, 3}), b = s.random({3});
  const Tensor proj = s.random({4, 3});
  const auto f = [&] { return dot(proj, linear(x, w, b)); };
  LinearGrads g = linear_backward(x, w, proj);
  s.add("linear", check_args(f, {{&x, g.input}, {&w, g.weight}, {&b, g.bias}}, kLinearEps));
}

void check_gru_cell(Suite& s) {
  Tensor x = s.random({4}), h = s.random({3});
  GruParams p = GruParams::random(4, 3, s.next_seed());
  const Tensor proj = s.random({3});
  const auto f = [&] { return dot(proj, gru_cell(x, h, p)); };
  GruCellGrads g = gru_cell_backward(x, h, p, proj);
  s.add("gru_cell", check_args(f, {{&x, g.input}, {&h, g.hidden},
                                   {&p.w_z, g.params.w_z}, {&p.w_r, g.params.w_r}, {&p.w_h, g.params.w_h},
                                   {&p.u_z, g.params.u_z}, {&p.u_r, g.params.u_r}, {&p.u_h, g.params.u_h},
                                   {&p.b_z, g.params.b_z}, {&p.b_r, g.params.b_r}, {&p.b_h, g.params.b_h}},
                                   kSmoothEps));
}

void check_lstm_cell(Suite& s) {
  Tensor x = s.random({4});
  LstmState st{s.random({3}), s.random({3})};
  LstmParams p = LstmParams::random(4, 3, s.next_seed());
  const Tensor proj_h = s.random({3}), proj_c = s.random({3});
  const auto f = [&] {
    const LstmState out = lstm_cell(x, st, p);
    return dot(proj_h, out.h) + dot(proj_c, out.c);
  };
  LstmCellGrads g = lstm_cell_backward(x, st, p, proj_h, proj_c);
  s.add("lstm_cell",
        check_args(f, {{&x, g.input}, {&st.h, g.state.h}, {&st.c, g.state.c},
                       {&p.w_i, g.params.w_i}, {&p.w_f, g.params.w_f}, {&p.w_o, g.params.w_o},
                       {&p.w_g, g.params.w_g}, {&p.u_i, g.params.u_i}, {&p.u_f, g.params.u_f},
                       {&p.u_o, g.params.u_o}, {&p.u_g, g.params.u_g}, {&p.b_i, g.params.b_i},
                       {&p.b_f, g.params.b_f}, {&p.b_o, g.params.b_o}, {&p.b_g, g.params.b_g}},
                       kSmoothEps));
}

void check_softmax(Suite& s) {
  Tensor z = s.random({3, 5}, 2.0);
  const Tensor proj = s.random({3, 5});
  GradReport worst;
  for (SoftmaxForm form : {SoftmaxForm::Plain, SoftmaxForm::Log}) {
    const auto f = [&] { return dot(proj, softmax_rows(z, form)); };
    const GradReport r = check_args(f, {{&z, softmax_rows_backward(softmax_rows(z, form), proj, form)}}, kSmoothEps);
    if (r.max_relative_error >= worst.max_relative_error) worst = r;
  }
  s.add("softmax", worst);
}

void check_cross_entropy(Suite& s) {
  Tensor z = s.random({6}, 2.0);
  const std::size_t label = 2;
  const auto f = [&] {
    return cross_entropy(softmax_rows(z.reshaped({1, 6})).reshaped({6}), label);
  };
  s.add("cross_entropy", check_args(f, {{&z, softmax_cross_entropy_grad(z, label)}}, kSmoothEps));
}

void check_ctc(Suite& s) {
  Tensor z = s.random({6, 4}, 2.0);
  const LabelSequence target{0, 1, 1};
  const auto f = [&] { return ctc_loss(LogProbMatrix::from_logits(z), target); };
  s.add("ctc_grad", check_args(f, {{&z, ctc_grad(LogProbMatrix::from_logits(z), target)}}, kSmoothEps));
}

void check_lipnet(Suite& s, std::uint64_t seed) {
  const LipNetConfig cfg = LipNetConfig::shrunken();
  ModelParams m = build_lipnet(cfg, seed);
  const Tensor video = Tensor({cfg.frames, cfg.in_channels, cfg.height, cfg.width}, RandomFill{seed, 0.0, 1.0});
  const LabelSequence target{0, 2, 1};
  LipNetTrace trace;
  const CtcResult c = ctc_loss_and_grad(lipnet_forward(m, video, &trace), target);
  ModelGrads g = lipnet_backward(m, trace, c.grad);
  const auto f = [&] { return ctc_loss(lipnet_forward(m, video), target); };
  // Conv parameters sit upstream of the max pools, so their step stays
  // small enough not to flip a window's winner. Everything after the pools
  // is smooth and takes a larger step, which keeps rounding noise below the
  // smallest gradient entries.
  std::vector<Arg> args;
  for (auto& [name, t] : m.params) {
    const bool before_pool = name.rfind("conv", 0) == 0;
    args.push_back({&t, g.params.at(name), before_pool ? 1e-5 : kSmoothEps});
  }
  s.add("lipnet_shrunken", check_args(f, std::move(args), kSmoothEps), kModelTolerance);
}

}  // namespace

std::vector<GradCheckEntry> run_gradient_suite(std::uint64_t seed) {
  Suite s(seed);
  check_conv2d(s);
  check_stcnn3d(s);
  check_maxpool3d(s);
  check_linear(s);
  check_gru_cell(s);
  check_lstm_cell(s);
  check_softmax(s);
  check_cross_entropy(s);
  check_ctc(s);
  check_lipnet(s, seed);
  return std::move(s.entries);
}

}  // namespace lipread

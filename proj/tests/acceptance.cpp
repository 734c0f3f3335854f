// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <string>

#include "lipread/audio.hpp"
#include "lipread/ctc.hpp"
#include "lipread/data.hpp"
#include "lipread/gradcheck.hpp"
#include "lipread/models.hpp"
#include "lipread/training.hpp"
#include "synthetic.hpp"

using namespace lipread;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

LogProbMatrix random_lp(std::size_t T, std::size_t V, std::uint64_t seed) {
  return LogProbMatrix::from_logits(Tensor({T, V}, RandomFill{seed, -3, 3}));
}

// Every label sequence over `labels` symbols of length 0..max_len.
std::vector<LabelSequence> all_targets(std::size_t labels, std::size_t max_len) {
  std::vector<LabelSequence> out{{}};
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].size() == max_len) continue;
    for (std::size_t s = 0; s < labels; ++s) {
      LabelSequence next = out[i];
      next.push_back(s);
      out.push_back(std::move(next));
    }
  }
  return out;
}

// Most probable collapsed labelling by summing all V^T paths.
std::pair<LabelSequence, double> exhaustive_best(const LogProbMatrix& lp) {
  const std::size_t T = lp.frames(), V = lp.vocab_size();
  std::map<LabelSequence, double> prob;
  std::vector<std::size_t> path(T, 0);
  while (true) {
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) s += lp.at(t, path[t]);
    prob[collapse(path, V)] += std::exp(s);
    std::size_t t = 0;
    while (t < T && ++path[t] == V) path[t++] = 0;
    if (t == T) break;
  }
  auto best = prob.begin();
  for (auto it = prob.begin(); it != prob.end(); ++it)
    if (it->second > best->second) best = it;
  return *best;
}

bool float_equal(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const float x = static_cast<float>(a[i]), y = static_cast<float>(b[i]);
    if (std::memcmp(&x, &y, sizeof x) != 0) return false;
  }
  return true;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome shape_golden() {
  const double t0 = cpu_seconds();
  ModelParams m = build_lipnet(LipNetConfig{}, 1);
  LipNetTrace tr;
  lipnet_forward(m, Tensor({75, 3, 50, 100}, RandomFill{2, 0, 1}), &tr);
  const std::pair<const Tensor*, Shape> checks[] = {
      {&tr.conv[0], {75, 32, 25, 50}}, {&tr.pooled[0], {75, 32, 12, 25}}, {&tr.conv[1], {75, 64, 12, 25}},
      {&tr.pooled[1], {75, 64, 6, 12}}, {&tr.conv[2], {75, 96, 6, 12}},   {&tr.features, {75, 96 * 3 * 6}},
      {&tr.gru1, {75, 512}},            {&tr.gru2, {75, 512}},            {&tr.logits, {75, 28}},
  };
  std::size_t ok = 0;
  for (const auto& [t, want] : checks) ok += t->dims() == want;
  const double secs = cpu_seconds() - t0;
  return {ok == 9 && secs < 30.0, std::to_string(ok) + "/9 shapes, " + fmt("%.1f s", secs) + " (limit 30 s)"};
}

Outcome ctc_oracle_equivalence() {
  const double t0 = cpu_seconds();
  double worst = 0.0;
  std::size_t compared = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t T = 1 + seed % 6, V = 2 + (seed / 6) % 3;
    LogProbMatrix lp = random_lp(T, V, derive_seed(2, seed));
    for (const LabelSequence& target : all_targets(V - 1, 3)) {
      if (ctc_min_frames(target) > T) continue;
      worst = std::max(worst, std::abs(ctc_loss(lp, target) - ctc_oracle(lp, target)));
      ++compared;
    }
  }
  const double secs = cpu_seconds() - t0;
  return {worst <= 1e-9 && secs < 60.0, std::to_string(compared) + " targets, max |diff| " + fmt("%.2e", worst) +
                                            " (tol 1e-9), " + fmt("%.1f s", secs) + " (limit 60 s)"};
}

Outcome ctc_completeness() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t T = 1 + seed % 4, V = 2 + (seed / 4) % 2;
    LogProbMatrix lp = random_lp(T, V, derive_seed(3, seed));
    double total = 0.0;
    for (const LabelSequence& target : all_targets(V - 1, T))
      if (ctc_min_frames(target) <= T) total += std::exp(-ctc_loss(lp, target));
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return {worst <= 1e-6, "20 seeds, max |sum - 1| " + fmt("%.2e", worst) + " (tol 1e-6)"};
}

Outcome gradient_suite() {
  const double t0 = cpu_seconds();
  bool ok = true;
  std::string detail;
  for (const GradCheckEntry& e : run_gradient_suite(0)) {
    ok = ok && e.passed();
    detail += e.name + " " + fmt("%.1e", e.report.max_relative_error) + (e.passed() ? "" : " FAIL") + ", ";
  }
  const double secs = cpu_seconds() - t0;
  return {ok && secs < 300.0, detail + fmt("%.1f s", secs) + " (limit 300 s)"};
}

Outcome toy_ctc() {
  const double t0 = cpu_seconds();
  auto [train, test] = synthetic::split(synthetic::moving_pattern_videos({}, 1), 0.2);
  LipNetConfig cfg = LipNetConfig::shrunken(20, 4);
  cfg.conv[0].channels = 8;
  cfg.conv[1].channels = 16;
  cfg.conv[2].channels = 16;
  cfg.gru_hidden = 16;
  ModelParams m = build_lipnet(cfg, 3);
  OptimizerState opt = OptimizerState::adam(3e-3);
  for (std::size_t e = 1; e <= 25 && cpu_seconds() - t0 < 300.0; ++e) {
    TrainOptions o;
    o.batch_size = 8;
    o.seed = 5;
    o.epoch = e;
    train_epoch(m, train, LossKind::Ctc, opt, o);
  }
  const double cer = *evaluate(m, test, EvalMode::Ctc).cer;
  const double secs = cpu_seconds() - t0;
  return {cer <= 0.05 && secs <= 300.0, "held-out CER " + fmt("%.4f", cer) + " (limit 0.05) on " +
                                            std::to_string(test.size()) + " clips, " + fmt("%.1f s", secs) +
                                            " CPU (limit 300 s)"};
}

Outcome toy_audio() {
  const double t0 = cpu_seconds();
  auto [train, test] = synthetic::split(synthetic::tone_signature_features({}, MfccConfig{}, 1), 0.2);
  ModelParams m = build_audio_net(AudioNetConfig{13, 32, 10}, 3);
  OptimizerState opt = OptimizerState::adam(3e-3);
  for (std::size_t e = 1; e <= 10 && cpu_seconds() - t0 < 120.0; ++e) {
    TrainOptions o;
    o.batch_size = 16;
    o.seed = 5;
    o.epoch = e;
    train_epoch(m, train, LossKind::CrossEntropy, opt, o);
  }
  const double acc = *evaluate(m, test, EvalMode::Classify).accuracy;
  const double secs = cpu_seconds() - t0;
  return {acc >= 0.9 && secs <= 120.0, "held-out accuracy " + fmt("%.4f", acc) + " (min 0.90) on " +
                                           std::to_string(test.size()) + " signals, " + fmt("%.1f s", secs) +
                                           " CPU (limit 120 s)"};
}

Outcome mfcc_invariants() {
  const double shift = std::sqrt(26.0) * std::log(4.0);
  double scale_err = 0.0, hop_err = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<double> x(4000 + 160 * seed);
    Tensor noise({x.size()}, RandomFill{derive_seed(7, seed), -0.5, 0.5});
    std::copy(noise.values().begin(), noise.values().end(), x.begin());

    std::vector<double> x2 = x;
    for (double& v : x2) v *= 2.0;
    Tensor a = mfcc(x), b = mfcc(x2);
    for (std::size_t t = 0; t < a.dim(0); ++t)
      for (std::size_t k = 0; k < 13; ++k)
        scale_err = std::max(scale_err, std::abs(b.at({t, k}) - a.at({t, k}) - (k == 0 ? shift : 0.0)));

    // Frame 0 of the shifted signal sees a restarted pre-emphasis; skip it.
    std::vector<double> shifted(x.begin() + 160, x.end());
    Tensor s = mfcc(shifted);
    if (s.dim(0) + 1 != a.dim(0)) return {false, "hop shift changed the frame count"};
    for (std::size_t t = 1; t < s.dim(0); ++t)
      for (std::size_t k = 0; k < 13; ++k) hop_err = std::max(hop_err, std::abs(s.at({t, k}) - a.at({t + 1, k})));
  }
  return {scale_err <= 1e-6 && hop_err <= 1e-6,
          "10 signals, scaling max err " + fmt("%.2e", scale_err) + ", hop shift max err " + fmt("%.2e", hop_err) +
              " (tol 1e-6)"};
}

Outcome decoder_exactness() {
  std::size_t exact = 0, greedy = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    LogProbMatrix lp = random_lp(3, 3, derive_seed(8, seed));
    exact += prefix_beam_decode(lp, 27) == exhaustive_best(lp).first;
    greedy += prefix_beam_decode(lp, 1) == greedy_decode(lp);
  }
  return {exact == 50 && greedy == 50, "width 27 exact " + std::to_string(exact) + "/50, width 1 greedy " +
                                           std::to_string(greedy) + "/50"};
}

Outcome persistence() {
  const fs::path dir = fs::temp_directory_path() / "lipread_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  Tensor clip({75, 3, 50, 100}, RandomFill{9, 0, 1});
  save_tensor_file(clip, dir / "clip.uvt");
  const bool uvt_ok = float_equal(clip, load_tensor_file(dir / "clip.uvt"));

  ModelParams m = build_lipnet(LipNetConfig{}, 4);
  checkpoint_save(m, dir / "m.ckpt");
  ModelParams back = checkpoint_load(dir / "m.ckpt");
  bool ckpt_ok = back.params.size() == m.params.size() && back.lipnet() == m.lipnet();
  for (const auto& [name, t] : m.params) ckpt_ok = ckpt_ok && float_equal(t, back.params.at(name));

  auto train_once = [&](const fs::path& out) {
    synthetic::VideoTaskOptions vo;
    vo.count = 16;
    Dataset d = synthetic::moving_pattern_videos(vo, 11);
    LipNetConfig cfg = LipNetConfig::shrunken(20, 4);
    ModelParams model = build_lipnet(cfg, 12);
    OptimizerState opt = OptimizerState::adam(1e-2);
    for (std::size_t e = 1; e <= 2; ++e) {
      TrainOptions o;
      o.batch_size = 4;
      o.seed = 13;
      o.epoch = e;
      train_epoch(model, d, LossKind::Ctc, opt, o);
    }
    checkpoint_save(model, out);
  };
  train_once(dir / "a.ckpt");
  train_once(dir / "b.ckpt");
  const bool same = slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt") &&
                    slurp(dir / "a.ckpt.cfg") == slurp(dir / "b.ckpt.cfg");
  fs::remove_all(dir);
  return {uvt_ok && ckpt_ok && same, std::string("uvt ") + (uvt_ok ? "exact" : "differs") + ", checkpoint " +
                                         (ckpt_ok ? "exact" : "differs") + ", retrain " +
                                         (same ? "byte-identical" : "differs")};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"shape golden test", shape_golden},
      {"CTC oracle equivalence", ctc_oracle_equivalence},
      {"CTC completeness", ctc_completeness},
      {"gradient suite", gradient_suite},
      {"toy CTC convergence", toy_ctc},
      {"toy audio classification", toy_audio},
      {"MFCC invariants", mfcc_invariants},
      {"decoder exactness", decoder_exactness},
      {"persistence", persistence},
  };
  int failed = 0, n = 0;
  for (const auto& [name, fn] : criteria) {
    ++n;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d %s: %s (%s)\n", n, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

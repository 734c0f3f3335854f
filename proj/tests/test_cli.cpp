// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "lipread/cli.hpp"
#include "lipread/data.hpp"
#include "synthetic.hpp"

using namespace lipread;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lipread_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // One 6-frame 8x8 clip labelled "ab" plus a three-symbol vocabulary.
  void write_video_task() {
    std::ofstream(path("vocab.txt")) << "a\nb\nc\n";
    Tensor clip({6, 1, 8, 8});
    for (std::size_t t = 0; t < 6; ++t) {
      const Tensor f = synthetic::pattern_frame(t < 3 ? 0 : 1, t);
      for (std::size_t p = 0; p < 64; ++p) clip[t * 64 + p] = f[p];
    }
    save_tensor_file(clip, path("clip.uvt"));
    std::ofstream(path("train.tsv")) << "# one clip\n" << path("clip.uvt") << "\tab\n";
    std::ofstream(path("lipnet.cfg")) << "model=lipnet\nconv1.channels=4\nconv2.channels=4\nconv3.channels=4\n"
                                         "conv1.stride=1,1,1\ngru_hidden=8\nepochs=150\nlearning_rate=0.01\n"
                                         "batch_size=1\npatience=150\n";
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, MfccOfOneSecondWav) {
  WavAudio a;
  a.sample_rate = 16000;
  for (std::size_t i = 0; i < 16000; ++i) a.samples.push_back(0.3 * std::sin(2 * std::numbers::pi * 440.0 * i / 16000.0));
  save_wav(a, path("in.wav"));
  CliRun r = run({"mfcc", path("in.wav"), path("out.uvt")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(load_tensor_file(path("out.uvt")).dims(), (Shape{98, 13}));
  EXPECT_EQ(r.out.rfind("# mfcc configuration\n", 0), 0u);
  EXPECT_NE(r.out.find("n_coeffs=13\n"), std::string::npos);
}

TEST_F(Cli, MfccOverridesAreApplied) {
  WavAudio a;
  a.sample_rate = 16000;
  a.samples.assign(16000, 0.1);
  save_wav(a, path("in.wav"));
  std::ofstream(path("m.cfg")) << "n_coeffs=10\nhop=320\n";
  CliRun r = run({"mfcc", "--config", path("m.cfg"), "--set", "n_coeffs=8", path("in.wav"), path("out.uvt")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(load_tensor_file(path("out.uvt")).dims(), (Shape{49, 8}));
  EXPECT_EQ(run({"mfcc", "--set", "bogus=1", path("in.wav"), path("o2.uvt")}).code, kExitUsage);
}

TEST_F(Cli, GradcheckPasses) {
  CliRun r = run({"gradcheck"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  for (const char* op : {"conv2d", "stcnn3d", "maxpool3d", "linear", "gru_cell", "lstm_cell", "softmax",
                         "cross_entropy", "ctc_grad", "lipnet_shrunken"})
    EXPECT_NE(r.out.find(op), std::string::npos) << op;
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#' || line.find('=') != std::string::npos) continue;
    std::istringstream fields(line);
    std::string name;
    double err = 1.0;
    fields >> name >> err;
    EXPECT_LT(err, 1e-4) << line;
  }
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"decode"}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  std::ofstream(path("bad.wav")) << "not a wav file at all, just text padding";
  CliRun r = run({"mfcc", path("bad.wav"), path("o.uvt")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("BadMagic"), std::string::npos);
}

TEST_F(Cli, DecodeMemorisedSample) {
  write_video_task();
  CliRun t = run({"train", "--config", path("lipnet.cfg"), "--manifest", path("train.tsv"), "--vocab",
               path("vocab.txt"), "--out", path("m.ckpt"), "--seed", "3"});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  CliRun d = run({"decode", "--checkpoint", path("m.ckpt"), path("clip.uvt")});
  ASSERT_EQ(d.code, kExitOk) << d.err;
  EXPECT_EQ(d.out.substr(d.out.rfind('#') + 2), "ab\n");
  CliRun b = run({"decode", "--checkpoint", path("m.ckpt"), "--beam", "8", path("clip.uvt")});
  EXPECT_EQ(b.out.substr(b.out.rfind('#') + 2), "ab\n");

  CliRun e = run({"eval", "--checkpoint", path("m.ckpt"), "--manifest", path("train.tsv")});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_NE(e.out.find("cer=0.000000\n"), std::string::npos);

  const std::string log = slurp(path("m.ckpt.log"));
  EXPECT_EQ(log.rfind("#epoch\tloss\tcer\n", 0), 0u);
  EXPECT_NE(log.find("\n1\t"), std::string::npos);
}

TEST_F(Cli, TrainingIsReproducible) {
  write_video_task();
  std::vector<std::string> base{"train", "--config", path("lipnet.cfg"), "--set", "epochs=3", "--manifest",
                                path("train.tsv"), "--vocab", path("vocab.txt"), "--seed", "5"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", path("a.ckpt")});
  b.insert(b.end(), {"--out", path("b.ckpt")});
  CliRun ra = run(a), rb = run(b);
  ASSERT_EQ(ra.code, kExitOk) << ra.err;
  ASSERT_EQ(rb.code, kExitOk) << rb.err;
  EXPECT_EQ(slurp(path("a.ckpt")), slurp(path("b.ckpt")));
  EXPECT_EQ(slurp(path("a.ckpt.log")), slurp(path("b.ckpt.log")));
}

TEST_F(Cli, AudioTrainAndDecodeClassName) {
  synthetic::AudioTaskOptions o;
  o.classes = 2;
  std::ofstream manifest(path("audio.tsv"));
  for (std::size_t i = 0; i < 6; ++i) {
    const std::size_t c = i % 2;
    WavAudio w{synthetic::tone_signature(c, o, i), 16000};
    const std::string p = path("s" + std::to_string(i) + ".wav");
    save_wav(w, p);
    manifest << p << '\t' << (c == 0 ? "yes" : "no") << '\n';
  }
  manifest.close();
  CliRun t = run({"train", "--set", "model=audio", "--set", "hidden=8", "--set", "epochs=30", "--set",
               "learning_rate=0.02", "--manifest", path("audio.tsv"), "--out", path("a.ckpt")});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  EXPECT_NE(t.out.find("#epoch\tloss\taccuracy"), std::string::npos);
  CliRun d = run({"decode", "--checkpoint", path("a.ckpt"), path("s1.wav")});
  ASSERT_EQ(d.code, kExitOk) << d.err;
  EXPECT_EQ(d.out.substr(d.out.rfind('#') + 2), "no\n");
}

TEST(CliBinary, RunsAsProcess) {
  const char* bin = std::getenv("LIPREAD_BIN");
  if (bin == nullptr) GTEST_SKIP() << "LIPREAD_BIN not set";
  EXPECT_EQ(std::system((std::string(bin) + " --help > /dev/null").c_str()), 0);
  EXPECT_NE(std::system((std::string(bin) + " nonsense > /dev/null 2>&1").c_str()), 0);
}

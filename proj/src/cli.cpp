// SPDX-License-Identifier: Apache-2.0
#include "lipread/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "lipread/audio.hpp"
#include "lipread/data.hpp"
#include "lipread/error.hpp"
#include "lipread/gradcheck.hpp"
#include "lipread/models.hpp"
#include "lipread/training.hpp"

namespace lipread {

namespace {

namespace fs = std::filesystem;

class UsageError : public Error {
 public:
  using Error::Error;
};

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
};

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string format_metric(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

double parse_double(const KeyValues& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const std::string& s = it->second;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw UsageError("config key " + key + ": \"" + s + "\" is not a number");
  }
  return v;
}

std::size_t parse_count(const KeyValues& kv, const std::string& key, std::size_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const std::string& s = it->second;
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw UsageError("config key " + key + ": \"" + s + "\" is not an unsigned integer");
  }
  return v;
}

// ---- configuration keys ----

struct TrainSettings {
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::size_t epochs = 50;
  std::size_t patience = 5;
  double max_grad_norm = 0.0;
  std::uint64_t seed = 0;
};

TrainSettings read_train(const KeyValues& kv, ModelKind kind) {
  TrainSettings s;
  s.learning_rate = kind == ModelKind::LipNet ? 1e-4 : 1e-3;
  if (auto it = kv.find("optimizer"); it != kv.end()) {
    if (it->second == "adam") s.optimizer = OptimizerKind::Adam;
    else if (it->second == "sgd") s.optimizer = OptimizerKind::Sgd;
    else throw UsageError("optimizer must be adam or sgd, got " + it->second);
  }
  s.learning_rate = parse_double(kv, "learning_rate", s.learning_rate);
  s.batch_size = parse_count(kv, "batch_size", s.batch_size);
  s.epochs = parse_count(kv, "epochs", s.epochs);
  s.patience = parse_count(kv, "patience", s.patience);
  s.max_grad_norm = parse_double(kv, "max_grad_norm", s.max_grad_norm);
  s.seed = parse_count(kv, "seed", s.seed);
  if (!(s.learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (s.batch_size == 0 || s.epochs == 0) throw UsageError("batch_size and epochs must be >= 1");
  if (s.max_grad_norm < 0.0) throw UsageError("max_grad_norm must be >= 0");
  return s;
}

void write_train(const TrainSettings& s, KeyValues& kv) {
  kv["optimizer"] = s.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
  kv["learning_rate"] = format_double(s.learning_rate);
  kv["batch_size"] = std::to_string(s.batch_size);
  kv["epochs"] = std::to_string(s.epochs);
  kv["patience"] = std::to_string(s.patience);
  kv["max_grad_norm"] = format_double(s.max_grad_norm);
  kv["seed"] = std::to_string(s.seed);
}

MfccConfig read_mfcc(const KeyValues& kv, const std::string& prefix) {
  MfccConfig c;
  c.sample_rate = parse_double(kv, prefix + "sample_rate", c.sample_rate);
  c.pre_emphasis = parse_double(kv, prefix + "pre_emphasis", c.pre_emphasis);
  c.frame_len = parse_count(kv, prefix + "frame_len", c.frame_len);
  c.hop = parse_count(kv, prefix + "hop", c.hop);
  c.n_fft = parse_count(kv, prefix + "n_fft", c.n_fft);
  c.n_filters = parse_count(kv, prefix + "n_filters", c.n_filters);
  c.n_coeffs = parse_count(kv, prefix + "n_coeffs", c.n_coeffs);
  c.fmin = parse_double(kv, prefix + "fmin", c.fmin);
  c.fmax = parse_double(kv, prefix + "fmax", std::min(c.fmax, c.sample_rate / 2.0));
  c.log_floor = parse_double(kv, prefix + "log_floor", c.log_floor);
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  return c;
}

void write_mfcc(const MfccConfig& c, const std::string& prefix, KeyValues& kv) {
  kv[prefix + "sample_rate"] = format_double(c.sample_rate);
  kv[prefix + "pre_emphasis"] = format_double(c.pre_emphasis);
  kv[prefix + "frame_len"] = std::to_string(c.frame_len);
  kv[prefix + "hop"] = std::to_string(c.hop);
  kv[prefix + "n_fft"] = std::to_string(c.n_fft);
  kv[prefix + "n_filters"] = std::to_string(c.n_filters);
  kv[prefix + "n_coeffs"] = std::to_string(c.n_coeffs);
  kv[prefix + "fmin"] = format_double(c.fmin);
  kv[prefix + "fmax"] = format_double(c.fmax);
  kv[prefix + "log_floor"] = format_double(c.log_floor);
}

std::set<std::string> known_train_keys() {
  KeyValues all;
  write_config(LipNetConfig{}, all);
  write_config(AudioNetConfig{}, all);
  write_train(TrainSettings{}, all);
  write_mfcc(MfccConfig{}, "mfcc.", all);
  std::set<std::string> keys;
  for (const auto& [k, v] : all) keys.insert(k);
  return keys;
}

KeyValues gather_config(const CommonOptions& opts, const std::set<std::string>& known) {
  KeyValues kv;
  try {
    if (!opts.config_path.empty()) kv = load_key_values(opts.config_path);
  } catch (const DataError& e) {
    if (e.kind() == DataErrorKind::ParseError) throw UsageError(e.what());
    throw;
  }
  for (const std::string& o : opts.overrides) {
    const std::size_t eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got \"" + o + "\"");
    kv[o.substr(0, eq)] = o.substr(eq + 1);
  }
  for (const auto& [k, v] : kv)
    if (!known.count(k)) throw UsageError("unknown config key \"" + k + "\"");
  return kv;
}

void print_config(std::ostream& out, const std::string& command, const KeyValues& kv) {
  out << "# " << command << " configuration\n" << format_key_values(kv) << "#\n";
}

// ---- datasets ----

fs::path resolve(const fs::path& manifest, const std::string& entry) {
  const fs::path p(entry);
  return p.is_absolute() ? p : manifest.parent_path() / p;
}

std::string encode_vocab(const Vocabulary& vocab) {
  std::ostringstream os;
  os << std::hex;
  for (std::size_t i = 0; i < vocab.symbols().size(); ++i) {
    if (i) os << ',';
    os << static_cast<std::uint32_t>(vocab.symbols()[i]);
  }
  return os.str();
}

Vocabulary decode_vocab(const std::string& text) {
  std::vector<char32_t> symbols;
  std::istringstream is(text);
  std::string part;
  while (std::getline(is, part, ',')) {
    std::uint32_t cp = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), cp, 16);
    if (ec != std::errc() || ptr != part.data() + part.size()) {
      throw DataError(DataErrorKind::ParseError, "checkpoint vocabulary entry \"" + part + "\" is not hex");
    }
    symbols.push_back(static_cast<char32_t>(cp));
  }
  return Vocabulary(std::move(symbols));
}

Tensor audio_features(const fs::path& path, const MfccConfig& cfg) {
  if (path.extension() == ".wav") {
    const WavAudio wav = load_wav(path);
    if (static_cast<double>(wav.sample_rate) != cfg.sample_rate) {
      throw DataError(DataErrorKind::Unsupported, path.string() + ": sample rate " +
                                                      std::to_string(wav.sample_rate) + " Hz, configured " +
                                                      format_double(cfg.sample_rate));
    }
    return mfcc(wav.samples, cfg);
  }
  Tensor t = load_tensor_file(path);
  if (t.rank() != 2 || t.dim(1) != cfg.n_coeffs) {
    throw DataError(DataErrorKind::ShapeMismatch,
                    path.string() + ": expected T x " + std::to_string(cfg.n_coeffs) + " features, got " +
                        shape_to_string(t.dims()));
  }
  return t;
}

Dataset video_dataset(const fs::path& manifest, const Vocabulary& vocab) {
  Dataset ds;
  for (const ManifestEntry& e : load_manifest(manifest)) {
    ds.push_back({load_video_tensor(resolve(manifest, e.path)), vocab_encode(vocab, e.label)});
  }
  if (ds.empty()) throw DataError(DataErrorKind::ParseError, manifest.string() + ": no entries");
  return ds;
}

Dataset audio_dataset(const fs::path& manifest, const std::vector<std::string>& classes, const MfccConfig& cfg) {
  Dataset ds;
  for (const ManifestEntry& e : load_manifest(manifest)) {
    auto it = std::find(classes.begin(), classes.end(), e.label);
    if (it == classes.end()) {
      throw DataError(DataErrorKind::UnknownSymbol, manifest.string() + ": unknown class \"" + e.label + "\"");
    }
    ds.push_back({audio_features(resolve(manifest, e.path), cfg),
                  {static_cast<std::size_t>(it - classes.begin())}});
  }
  if (ds.empty()) throw DataError(DataErrorKind::ParseError, manifest.string() + ": no entries");
  return ds;
}

std::vector<std::string> classes_from_metadata(const ModelParams& m) {
  std::vector<std::string> classes(m.audio().n_classes);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    auto it = m.metadata.find("class." + std::to_string(i));
    if (it == m.metadata.end()) {
      throw DataError(DataErrorKind::MissingParameter, "checkpoint has no name for class " + std::to_string(i));
    }
    classes[i] = it->second;
  }
  return classes;
}

KeyValues mfcc_from_metadata(const ModelParams& m) {
  KeyValues kv;
  for (const auto& [k, v] : m.metadata)
    if (k.rfind("mfcc.", 0) == 0) kv[k] = v;
  return kv;
}

Vocabulary model_vocab(const ModelParams& m, const std::string& vocab_path) {
  Vocabulary v = vocab_path.empty() ? [&] {
    auto it = m.metadata.find("vocab");
    if (it == m.metadata.end()) throw UsageError("checkpoint stores no vocabulary; pass --vocab");
    return decode_vocab(it->second);
  }()
                                    : vocab_load(vocab_path);
  if (v.size() != m.lipnet().vocab_size) {
    throw DataError(DataErrorKind::ShapeMismatch, "vocabulary has " + std::to_string(v.size()) +
                                                      " symbols with blank, model expects " +
                                                      std::to_string(m.lipnet().vocab_size));
  }
  return v;
}

std::string metric_line(const TrainMetrics& t, const TrainMetrics* v) {
  std::string line = std::to_string(t.epoch) + "\t" + format_metric(t.mean_loss) + "\t" +
                     format_metric(t.cer ? *t.cer : t.accuracy.value_or(0.0));
  if (v) line += "\t" + format_metric(v->mean_loss) + "\t" + format_metric(v->cer ? *v->cer : v->accuracy.value_or(0.0));
  return line;
}

// ---- subcommands ----

struct TrainArgs {
  CommonOptions common;
  std::string manifest, vocab, val, out, log;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a, std::ostream& out) {
  KeyValues user = gather_config(a.common, known_train_keys());
  if (a.seed) user["seed"] = std::to_string(*a.seed);
  const std::string model_name = user.count("model") ? user.at("model") : "lipnet";
  if (model_name != "lipnet" && model_name != "audio") throw UsageError("model must be lipnet or audio");
  const ModelKind kind = model_name == "lipnet" ? ModelKind::LipNet : ModelKind::AudioNet;
  const TrainSettings settings = read_train(user, kind);
  const fs::path manifest(a.manifest);

  Dataset train, val;
  ModelParams model;
  KeyValues effective;
  LossKind loss = LossKind::Ctc;
  if (kind == ModelKind::LipNet) {
    if (a.vocab.empty()) throw UsageError("train with model=lipnet needs --vocab");
    const Vocabulary vocab = vocab_load(a.vocab);
    train = video_dataset(manifest, vocab);
    if (!a.val.empty()) val = video_dataset(a.val, vocab);
    LipNetConfig base;
    const Shape& clip = train.front().input.dims();
    base.frames = clip[0];
    base.in_channels = clip[1];
    base.height = clip[2];
    base.width = clip[3];
    base.vocab_size = vocab.size();
    LipNetConfig cfg;
    try {
      cfg = read_lipnet_config(user, base);
      cfg.validate();
    } catch (const DataError& e) {
      throw UsageError(e.what());
    } catch (const ShapeError& e) {
      throw UsageError(e.what());
    }
    if (cfg.vocab_size != vocab.size()) throw UsageError("vocab_size disagrees with the vocabulary file");
    model = build_lipnet(cfg, settings.seed);
    model.metadata["vocab"] = encode_vocab(vocab);
    write_config(cfg, effective);
  } else {
    loss = LossKind::CrossEntropy;
    const MfccConfig mcfg = read_mfcc(user, "mfcc.");
    std::set<std::string> names;
    for (const ManifestEntry& e : load_manifest(manifest)) names.insert(e.label);
    const std::vector<std::string> classes(names.begin(), names.end());
    train = audio_dataset(manifest, classes, mcfg);
    if (!a.val.empty()) val = audio_dataset(a.val, classes, mcfg);
    AudioNetConfig base;
    base.input_coeffs = mcfg.n_coeffs;
    base.n_classes = classes.size();
    AudioNetConfig cfg;
    try {
      cfg = read_audio_config(user, base);
      cfg.validate();
    } catch (const DataError& e) {
      throw UsageError(e.what());
    } catch (const ShapeError& e) {
      throw UsageError(e.what());
    }
    if (cfg.n_classes != classes.size() || cfg.input_coeffs != mcfg.n_coeffs) {
      throw UsageError("n_classes and input_coeffs follow the manifest and mfcc.n_coeffs");
    }
    model = build_audio_net(cfg, settings.seed);
    for (std::size_t i = 0; i < classes.size(); ++i) model.metadata["class." + std::to_string(i)] = classes[i];
    KeyValues mkv;
    write_mfcc(mcfg, "mfcc.", mkv);
    for (const auto& [k, v] : mkv) model.metadata[k] = v;
    write_config(cfg, effective);
    effective.insert(mkv.begin(), mkv.end());
  }
  write_train(settings, effective);
  effective["manifest"] = a.manifest;
  effective["out"] = a.out;
  print_config(out, "train", effective);

  OptimizerState opt = settings.optimizer == OptimizerKind::Adam ? OptimizerState::adam(settings.learning_rate)
                                                                 : OptimizerState::sgd(settings.learning_rate);
  FitOptions fo;
  fo.max_epochs = settings.epochs;
  fo.patience = settings.patience;
  fo.train.batch_size = settings.batch_size;
  fo.train.seed = settings.seed;
  fo.train.max_grad_norm = settings.max_grad_norm;

  const std::string log_path = a.log.empty() ? a.out + ".log" : a.log;
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw DataError(DataErrorKind::Io, "cannot open " + log_path);
  const char* metric = kind == ModelKind::LipNet ? "cer" : "accuracy";
  std::string header = std::string("#epoch\tloss\t") + metric;
  if (!val.empty()) header += std::string("\tval_loss\tval_") + metric;
  log << header << '\n';
  out << header << '\n';

  const FitResult result = fit(model, train, val, loss, opt, fo, [&](const TrainMetrics& t, const TrainMetrics* v) {
    const std::string line = metric_line(t, v);
    log << line << '\n';
    log.flush();
    out << line << '\n';
  });
  checkpoint_save(model, a.out);
  out << "best_epoch=" << result.best_epoch << "\ncheckpoint=" << a.out << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint, manifest, vocab;
};

int run_eval(const EvalArgs& a, std::ostream& out) {
  const ModelParams model = checkpoint_load(a.checkpoint);
  KeyValues effective;
  std::visit([&](const auto& cfg) { write_config(cfg, effective); }, model.config);
  effective["checkpoint"] = a.checkpoint;
  effective["manifest"] = a.manifest;

  TrainMetrics m;
  if (model.kind() == ModelKind::LipNet) {
    const Vocabulary vocab = model_vocab(model, a.vocab);
    print_config(out, "eval", effective);
    m = evaluate(model, video_dataset(a.manifest, vocab), EvalMode::Ctc);
  } else {
    const MfccConfig mcfg = read_mfcc(mfcc_from_metadata(model), "mfcc.");
    write_mfcc(mcfg, "mfcc.", effective);
    print_config(out, "eval", effective);
    m = evaluate(model, audio_dataset(a.manifest, classes_from_metadata(model), mcfg), EvalMode::Classify);
  }
  out << "loss=" << format_metric(m.mean_loss) << '\n';
  if (m.cer) out << "cer=" << format_metric(*m.cer) << '\n';
  if (m.accuracy) out << "accuracy=" << format_metric(*m.accuracy) << '\n';
  out << "skipped=" << m.skipped << '\n';
  return kExitOk;
}

struct DecodeArgs {
  std::string checkpoint, input, vocab;
  std::size_t beam = 1;
};

int run_decode(const DecodeArgs& a, std::ostream& out) {
  if (a.beam == 0) throw UsageError("--beam must be >= 1");
  const ModelParams model = checkpoint_load(a.checkpoint);
  KeyValues effective;
  std::visit([&](const auto& cfg) { write_config(cfg, effective); }, model.config);
  effective["checkpoint"] = a.checkpoint;
  effective["input"] = a.input;
  if (model.kind() == ModelKind::LipNet) {
    const Vocabulary vocab = model_vocab(model, a.vocab);
    effective["beam"] = std::to_string(a.beam);
    print_config(out, "decode", effective);
    const LogProbMatrix lp = lipnet_forward(model, load_video_tensor(a.input));
    const LabelSequence labels = a.beam == 1 ? greedy_decode(lp) : prefix_beam_decode(lp, a.beam);
    out << vocab_decode(vocab, labels) << '\n';
  } else {
    const MfccConfig mcfg = read_mfcc(mfcc_from_metadata(model), "mfcc.");
    write_mfcc(mcfg, "mfcc.", effective);
    print_config(out, "decode", effective);
    const Tensor probs = audio_forward(model, audio_features(a.input, mcfg));
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
      if (probs[i] > probs[best]) best = i;
    out << classes_from_metadata(model).at(best) << '\n';
  }
  return kExitOk;
}

struct MfccArgs {
  CommonOptions common;
  std::string input, output;
};

int run_mfcc(const MfccArgs& a, std::ostream& out) {
  std::set<std::string> known;
  {
    KeyValues all;
    write_mfcc(MfccConfig{}, "", all);
    for (const auto& [k, v] : all) known.insert(k);
  }
  KeyValues user = gather_config(a.common, known);
  const WavAudio wav = load_wav(a.input);
  if (user.count("sample_rate") && parse_double(user, "sample_rate", 0.0) != wav.sample_rate) {
    throw UsageError("sample_rate is taken from the WAV header (" + std::to_string(wav.sample_rate) + " Hz)");
  }
  user["sample_rate"] = std::to_string(wav.sample_rate);
  const MfccConfig cfg = read_mfcc(user, "");
  KeyValues effective;
  write_mfcc(cfg, "", effective);
  effective["input"] = a.input;
  effective["output"] = a.output;
  print_config(out, "mfcc", effective);
  const Tensor features = mfcc(wav.samples, cfg);
  save_tensor_file(features, a.output);
  out << "wrote " << a.output << ' ' << shape_to_string(features.dims()) << '\n';
  return kExitOk;
}

int run_gradcheck(std::uint64_t seed, std::ostream& out) {
  KeyValues effective{{"seed", std::to_string(seed)}};
  print_config(out, "gradcheck", effective);
  bool ok = true;
  for (const GradCheckEntry& e : run_gradient_suite(seed)) {
    std::ostringstream err;
    err << std::scientific << std::setprecision(3) << e.report.max_relative_error;
    std::ostringstream tol;
    tol << std::scientific << std::setprecision(0) << e.tolerance;
    out << std::left << std::setw(16) << e.name << err.str() << "  tol " << tol.str() << "  "
        << (e.passed() ? "ok" : "FAIL") << '\n';
    ok = ok && e.passed();
  }
  return ok ? kExitOk : kExitVerification;
}

void add_common(CLI::App* sub, CommonOptions& c) {
  sub->add_option("--config", c.config_path, "key=value config file")->check(CLI::ExistingFile);
  sub->add_option("--set", c.overrides, "override one config key (key=value), repeatable");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audio-visual lipreading toolkit", "lipread"};
  app.require_subcommand(1);

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model from a manifest");
  add_common(train_cmd, train.common);
  train_cmd->add_option("--manifest", train.manifest, "training manifest (path TAB label)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--vocab", train.vocab, "vocabulary file (lipnet)")->check(CLI::ExistingFile);
  train_cmd->add_option("--val", train.val, "validation manifest")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out, "checkpoint to write")->required();
  train_cmd->add_option("--log", train.log, "metrics log, appended (default: <out>.log)");
  train_cmd->add_option("--seed", train.seed, "random seed");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  eval_cmd->add_option("--checkpoint", eval.checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--manifest", eval.manifest)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--vocab", eval.vocab)->check(CLI::ExistingFile);

  DecodeArgs decode;
  CLI::App* decode_cmd = app.add_subcommand("decode", "decode one clip or recording");
  decode_cmd->add_option("--checkpoint", decode.checkpoint)->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("input", decode.input, ".uvt clip, or .wav / .uvt features for audio models")
      ->required()
      ->check(CLI::ExistingFile);
  decode_cmd->add_option("--vocab", decode.vocab)->check(CLI::ExistingFile);
  decode_cmd->add_option("--beam", decode.beam, "prefix beam width; 1 means greedy");

  MfccArgs mf;
  CLI::App* mfcc_cmd = app.add_subcommand("mfcc", "write MFCC features of a WAV file");
  add_common(mfcc_cmd, mf.common);
  mfcc_cmd->add_option("input", mf.input)->required()->check(CLI::ExistingFile);
  mfcc_cmd->add_option("output", mf.output)->required();

  std::uint64_t gc_seed = 0;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
  gc_cmd->add_option("--seed", gc_seed);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return run_train(train, out);
    if (eval_cmd->parsed()) return run_eval(eval, out);
    if (decode_cmd->parsed()) return run_decode(decode, out);
    if (mfcc_cmd->parsed()) return run_mfcc(mf, out);
    if (gc_cmd->parsed()) return run_gradcheck(gc_seed, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace lipread

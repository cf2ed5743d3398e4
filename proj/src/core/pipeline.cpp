// Copyright 2026 The UDSE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "binary_io.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace udse::pipeline {
namespace fs = std::filesystem;
namespace {

using config::RunConfig;
using corpus::Split;

class DirLock {
 public:
  explicit DirLock(const std::string& dir) {
    fs::create_directories(dir);
    const std::string path = (fs::path(dir) / ".udse.lock").string();
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + path);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw Error(ErrorKind::kRuntime, "another command is running in " + dir);
    }
  }
  ~DirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

// Tracks a command's inputs and outputs for the run log and cleanup.
class RunContext {
 public:
  RunContext(std::string command, const RunConfig& cfg, const CommandOptions& options)
      : command_(std::move(command)), cfg_(cfg), options_(options) {}

  void Info(const std::string& line) const {
    if (options_.log) options_.log(line);
  }
  void Input(const std::string& path) {
    inputs_.push_back(path + "\t" + HexDigest(HashFile(path)));
  }
  void Output(const std::string& path) { outputs_.push_back(path); }

  void WriteBytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    Output(path);
    WriteFileAtomic(path, bytes);
  }
  void WriteText(const std::string& path, const std::string& text) {
    WriteBytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  }

  void Finish() {
    std::ostringstream log;
    log << "# udse " << command_ << '\n';
    log << "# resolved config\n" << config::Format(cfg_) << '\n';
    log << "# inputs\n";
    for (const auto& i : inputs_) log << i << '\n';
    log << "# outputs\n";
    for (const auto& o : outputs_) {
      std::error_code ec;
      if (fs::is_regular_file(o, ec)) log << o << '\t' << HexDigest(HashFile(o)) << '\n';
    }
    log << "DONE\n";
    const std::string text = log.str();
    const std::string path = LogPath();
    fs::create_directories(fs::path(path).parent_path());
    WriteFileAtomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  }

  void Abort() noexcept {
    std::error_code ec;
    for (const auto& o : outputs_) {
      fs::remove(o, ec);
      fs::remove(o + ".partial", ec);
    }
    fs::remove(LogPath(), ec);
  }

 private:
  std::string LogPath() const {
    return (fs::path(cfg_.data.work_dir) / "logs" / (command_ + ".log")).string();
  }

  std::string command_;
  const RunConfig& cfg_;
  const CommandOptions& options_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
};

void RequireFile(const std::string& path, const std::string& what) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw ConfigError(what + " does not exist: " + path);
  }
}

void RequireDir(const std::string& path, const std::string& what) {
  std::error_code ec;
  if (!fs::is_directory(path, ec)) throw ConfigError(what + " does not exist: " + path);
}

bool Synthetic(const RunConfig& cfg, Split split) {
  return (split == Split::kTrain ? cfg.data.clean_train_dir : cfg.data.clean_test_dir).empty();
}

int ClipCount(const RunConfig& cfg, Split split) {
  return split == Split::kTrain ? cfg.data.synthetic_train_clips : cfg.data.synthetic_test_clips;
}

// Clean files for a split: the configured directory or freshly synthesized clips.
std::vector<std::string> CleanFiles(const RunConfig& cfg, Split split, RunContext& run) {
  const std::string dir = cfg.CleanDir(split);
  if (!Synthetic(cfg, split)) {
    RequireDir(dir, std::string("data.clean_") + corpus::SplitName(split) + "_dir");
    auto files = corpus::ListWavFiles(dir);
    if (files.empty()) throw ConfigError("no WAV files in " + dir);
    return files;
  }
  const int count = ClipCount(cfg, split);
  if (count == 0) return {};
  const std::uint64_t seed = DeriveSeed(cfg.data.seed, split == Split::kTrain ? 100 : 200);
  auto files = corpus::WriteSyntheticClean(dir, count, cfg.Speech(), seed);
  for (const auto& f : files) run.Output(f);
  run.Info("synthesized " + std::to_string(files.size()) + " clean " +
           corpus::SplitName(split) + " clips in " + dir);
  return files;
}

Waveform ReadAtRate(const std::string& path, int rate) {
  Waveform w = ReadWav(path);
  return w.sample_rate_hz == rate ? w : Resample(w, rate);
}

rvq::Codec LoadCodec(const RunConfig& cfg, RunContext& run) {
  const std::string path = cfg.CodecPath();
  RequireFile(path, "codec checkpoint");
  run.Input(path);
  rvq::Codec codec = rvq::Codec::Load(path);
  if (codec.stages() != cfg.codec.stages || codec.codebook_size() != cfg.codec.codebook_size ||
      codec.feature_dim() != cfg.codec.feature_dim ||
      codec.metadata().sample_rate_hz != cfg.codec.sample_rate) {
    throw ConfigError("codec checkpoint " + path + " does not match the [codec] section");
  }
  return codec;
}

model::UdseModel LoadModel(const RunConfig& cfg, const rvq::Codec& codec, RunContext& run) {
  const std::string path = cfg.ModelPath();
  RequireFile(path, "model checkpoint");
  run.Input(path);
  return model::UdseModel::Load(path, codec);
}

corpus::Manifest LoadManifest(const RunConfig& cfg, Split split, RunContext& run) {
  const std::string path = cfg.ManifestPath(split);
  RequireFile(path, std::string(corpus::SplitName(split)) + " manifest");
  run.Input(path);
  return corpus::ReadManifest(path);
}

std::vector<model::TrainExample> Examples(const RunConfig& cfg, const rvq::Codec& codec,
                                          const corpus::Manifest& manifest, RunContext& run) {
  std::vector<model::TrainExample> data;
  int skipped = 0;
  for (const auto& e : manifest.entries) {
    if (!e.ok()) {
      ++skipped;
      continue;
    }
    const Waveform clean = ReadAtRate(e.clean_path, cfg.codec.sample_rate);
    const Waveform degraded = ReadAtRate(e.degraded_path, cfg.codec.sample_rate);
    data.push_back(model::PrepareExample(codec, clean, degraded, e.degraded_path));
  }
  if (skipped) run.Info("skipped " + std::to_string(skipped) + " failed manifest entries");
  if (data.empty()) throw ConfigError("training manifest has no usable entries");
  return data;
}

long TrainingSteps(const RunConfig& cfg, std::size_t items) {
  return cfg.optim.epochs > 0 ? static_cast<long>(cfg.optim.epochs) * static_cast<long>(items)
                              : cfg.optim.total_steps;
}

model::UdseModel TrainModel(const RunConfig& cfg, const model::ModelConfig& mc,
                            const rvq::Codec& codec,
                            const std::vector<model::TrainExample>& data, RunContext& run,
                            model::TrainLog* log_out) {
  model::UdseModel m(mc, codec);
  model::TrainConfig tc;
  tc.steps = TrainingSteps(cfg, data.size());
  tc.optim = cfg.Optimizer(tc.steps);
  tc.seed = cfg.optim.seed;
  const long every = std::max(1L, tc.steps / 20);
  auto log = model::Train(m, codec, data, tc, [&](const model::StepRecord& r) {
    if (r.step % every == 0 || r.step == tc.steps) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "step %ld/%ld loss %.4f lr %.3g", r.step, tc.steps, r.loss,
                    r.lr);
      run.Info(buf);
    }
  });
  if (log_out) *log_out = std::move(log);
  return m;
}

eval::EvalOptions EvalOpts(const RunConfig& cfg) {
  eval::EvalOptions o;
  o.seed = cfg.eval.seed;
  o.lsd = {cfg.eval.lsd_frame_length, cfg.eval.lsd_hop, false};
  o.oracle_tokens = cfg.eval.oracle_tokens;
  o.spectrogram_dir = cfg.eval.spectrogram_dir;
  o.threads = cfg.data.threads;
  return o;
}

void TrainCodecCmd(const RunConfig& cfg, RunContext& run) {
  const auto files = CleanFiles(cfg, Split::kTrain, run);
  std::vector<Waveform> clips;
  for (const auto& f : files) {
    if (!Synthetic(cfg, Split::kTrain)) run.Input(f);
    clips.push_back(ReadAtRate(f, cfg.codec.sample_rate));
  }
  run.Info("training codec on " + std::to_string(clips.size()) + " clips");
  const rvq::Codec codec = rvq::TrainCodec(clips, cfg.CodecTraining());
  run.WriteBytes(cfg.CodecPath(), codec.Serialize());
  run.Info("codec " + HexDigest(codec.ContentHash()) + " written to " + cfg.CodecPath());
}

void BuildCorpusCmd(const RunConfig& cfg, RunContext& run) {
  const bool needs_codec =
      std::any_of(cfg.data.recipes.begin(), cfg.data.recipes.end(),
                  [](const std::string& r) { return r.find("CDR") != std::string::npos; });
  if (needs_codec) {
    RequireFile(cfg.CodecPath(), "codec checkpoint (needed by CDR recipes)");
    run.Input(cfg.CodecPath());
  }
  for (Split split : {Split::kTrain, Split::kTest}) {
    const auto files = CleanFiles(cfg, split, run);
    if (files.empty()) {
      run.Info(std::string("no clean ") + corpus::SplitName(split) + " clips; split skipped");
      continue;
    }
    corpus::BuildOptions b;
    b.recipes = cfg.data.recipes;
    b.split = split;
    b.seed = DeriveSeed(cfg.data.seed, split == Split::kTrain ? 1 : 2);
    b.recipe = cfg.Recipes(split);
    b.threads = cfg.data.threads;
    const auto manifest = corpus::BuildCorpus(files, cfg.CorpusDir(split), b);
    int failed = 0;
    for (const auto& e : manifest.entries) {
      if (e.ok()) {
        run.Output(e.degraded_path);
      } else {
        ++failed;
        run.Info("entry failed: " + e.clean_path + ": " + e.status);
      }
    }
    run.WriteText(cfg.ManifestPath(split), corpus::FormatManifest(manifest));
    run.Info(std::string(corpus::SplitName(split)) + ": " +
             std::to_string(manifest.entries.size()) + " entries, " + std::to_string(failed) +
             " failed");
  }
}

void TrainUdseCmd(const RunConfig& cfg, RunContext& run) {
  const rvq::Codec codec = LoadCodec(cfg, run);
  const auto manifest = LoadManifest(cfg, Split::kTrain, run);
  const auto data = Examples(cfg, codec, manifest, run);
  run.Info("training on " + std::to_string(data.size()) + " utterances");
  model::TrainLog log;
  const auto m = TrainModel(cfg, cfg.model, codec, data, run, &log);
  run.WriteBytes(cfg.ModelPath(), m.Serialize());
  run.WriteText((fs::path(cfg.data.work_dir) / "train_log.tsv").string(), log.Format());
}

void EnhanceCmd(const RunConfig& cfg, const CommandOptions& options, RunContext& run) {
  if (options.input.empty() || options.output.empty()) {
    throw ConfigError("enhance needs --in and --out");
  }
  const rvq::Codec codec = LoadCodec(cfg, run);
  const auto m = LoadModel(cfg, codec, run);
  std::vector<std::pair<std::string, std::string>> jobs;
  std::error_code ec;
  if (fs::is_directory(options.input, ec)) {
    for (const auto& f : corpus::ListWavFiles(options.input)) {
      jobs.emplace_back(f, (fs::path(options.output) / fs::path(f).filename()).string());
    }
  } else {
    RequireFile(options.input, "input");
    jobs.emplace_back(options.input, options.output);
  }
  for (const auto& [in, out] : jobs) {
    run.Input(in);
    const Waveform y = ReadAtRate(in, cfg.codec.sample_rate);
    const auto enhanced = model::Enhance(m, codec, y, cfg.eval.seed);
    WavWriteStats stats;
    const auto bytes = EncodeWav(enhanced.audio, SampleFormat::kFloat32, &stats);
    if (stats.saturated) {
      run.Info(out + ": " + std::to_string(stats.saturated) + " samples saturated");
    }
    run.WriteBytes(out, bytes);
  }
  run.Info("enhanced " + std::to_string(jobs.size()) + " file(s)");
}

void EvalCmd(const RunConfig& cfg, RunContext& run) {
  const rvq::Codec codec = LoadCodec(cfg, run);
  const auto m = LoadModel(cfg, codec, run);
  const auto manifest = LoadManifest(cfg, Split::kTest, run);
  const auto report = eval::EvaluateCorpus(manifest, m, codec, EvalOpts(cfg));
  for (const auto& w : report.warnings) run.Info("warning: " + w);
  run.WriteText(cfg.ReportPath(), report.Format());
  char buf[160];
  std::snprintf(buf, sizeof buf, "si_snr %.2f dB (degraded %.2f dB), lsd %.2f dB over %zu items",
                report.si_snr_db.mean, report.degraded_si_snr_db.mean, report.lsd_db.mean,
                report.records.size());
  run.Info(buf);
}

AblationRow Score(const std::string& name, const eval::EvalReport& report) {
  AblationRow row;
  row.variant = name;
  for (const auto& a : report.token_accuracy) row.token_accuracy.push_back(a.mean);
  double sum = 0.0;
  for (double a : row.token_accuracy) sum += a;
  row.mean_accuracy = row.token_accuracy.empty() ? 0.0 : sum / row.token_accuracy.size();
  row.si_snr_db = report.si_snr_db.mean;
  return row;
}

void AblateCmd(const RunConfig& cfg, const CommandOptions& options, RunContext& run) {
  const std::string variant = options.variant.empty() ? "all" : options.variant;
  std::vector<std::pair<std::string, model::ModelConfig>> variants;
  model::ModelConfig base = cfg.model;
  base.parallel_mode = false;
  base.global_condition_first_only = false;
  if (variant == "parallel" || variant == "all") {
    auto m = base;
    m.parallel_mode = true;
    variants.emplace_back("parallel", m);
  }
  if (variant == "first-only" || variant == "all") {
    auto m = base;
    m.global_condition_first_only = true;
    variants.emplace_back("first-only", m);
  }
  if (variants.empty()) throw ConfigError("ablate variant must be parallel, first-only or all");

  const rvq::Codec codec = LoadCodec(cfg, run);
  const auto train = LoadManifest(cfg, Split::kTrain, run);
  const auto test = LoadManifest(cfg, Split::kTest, run);
  const auto data = Examples(cfg, codec, train, run);
  const auto opts = EvalOpts(cfg);

  std::vector<AblationRow> rows;
  const fs::path dir = fs::path(cfg.data.work_dir) / "ablation";
  auto train_and_score = [&](const std::string& name, const model::ModelConfig& mc) {
    run.Info("training " + name);
    const auto m = TrainModel(cfg, mc, codec, data, run, nullptr);
    run.WriteBytes((dir / (name + ".udsenn")).string(), m.Serialize());
    auto o = opts;
    o.oracle_tokens = false;
    o.spectrogram_dir.clear();
    rows.push_back(Score(name, eval::EvaluateCorpus(test, m, codec, o)));
  };
  train_and_score("sequential", base);
  for (const auto& [name, mc] : variants) train_and_score(name, mc);
  const std::string table = FormatAblation(rows);
  run.WriteText((dir / ("ablation_" + variant + ".tsv")).string(), table);
  std::istringstream lines(table);
  for (std::string line; std::getline(lines, line);) run.Info(line);
}

void Apply(RunConfig& cfg, const CommandOptions& options) {
  if (options.seed) {
    const std::uint64_t s = *options.seed;
    cfg.codec.seed = s;
    cfg.model.init_seed = s;
    cfg.optim.seed = s;
    cfg.data.seed = s;
    cfg.eval.seed = s;
  }
  if (options.threads > 0) cfg.data.threads = options.threads;
}

}  // namespace

const std::vector<std::string>& Commands() {
  static const std::vector<std::string> commands = {"train-codec", "build-corpus", "train-udse",
                                                    "enhance",     "eval",         "ablate"};
  return commands;
}

config::RunConfig ResolveConfig(const CommandOptions& options) {
  const config::Profile* profile = options.profile ? &*options.profile : nullptr;
  RunConfig cfg = options.config_path.empty()
                      ? config::Defaults(profile ? *profile : config::Profile::kDesk)
                      : config::Load(options.config_path, profile);
  Apply(cfg, options);
  config::Validate(cfg);
  return cfg;
}

void Run(const std::string& command, const CommandOptions& options) {
  const auto& known = Commands();
  if (std::find(known.begin(), known.end(), command) == known.end()) {
    throw ConfigError("unknown command '" + command + "'");
  }
  const RunConfig cfg = ResolveConfig(options);
  DirLock lock(cfg.data.work_dir);
  RunContext run(command, cfg, options);
  try {
    if (command == "train-codec") {
      TrainCodecCmd(cfg, run);
    } else if (command == "build-corpus") {
      BuildCorpusCmd(cfg, run);
    } else if (command == "train-udse") {
      TrainUdseCmd(cfg, run);
    } else if (command == "enhance") {
      EnhanceCmd(cfg, options, run);
    } else if (command == "eval") {
      EvalCmd(cfg, run);
    } else {
      AblateCmd(cfg, options, run);
    }
    run.Finish();
  } catch (...) {
    run.Abort();
    throw;
  }
}

std::string FormatAblation(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "UDSE-ABLATION v1\n";
  const std::size_t stages = rows.empty() ? 0 : rows.front().token_accuracy.size();
  out << "variant";
  for (std::size_t n = 1; n <= stages; ++n) out << "\tacc" << n;
  out << "\tmean_acc\tsi_snr_db\n";
  char buf[64];
  auto emit = [&](const std::string& name, const std::vector<double>& acc, double mean,
                  double si) {
    out << name;
    for (double a : acc) {
      std::snprintf(buf, sizeof buf, "\t%.6f", a);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "\t%.6f\t%.4f\n", mean, si);
    out << buf;
  };
  for (const auto& r : rows) emit(r.variant, r.token_accuracy, r.mean_accuracy, r.si_snr_db);
  if (!rows.empty()) {
    const auto& base = rows.front();
    for (std::size_t i = 1; i < rows.size(); ++i) {
      std::vector<double> delta;
      for (std::size_t n = 0; n < stages; ++n) {
        delta.push_back(rows[i].token_accuracy[n] - base.token_accuracy[n]);
      }
      emit("delta(" + rows[i].variant + "-" + base.variant + ")", delta,
           rows[i].mean_accuracy - base.mean_accuracy, rows[i].si_snr_db - base.si_snr_db);
    }
  }
  return out.str();
}

}  // namespace udse::pipeline

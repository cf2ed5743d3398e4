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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "metrics.hpp"
#include "nn/optim.hpp"
#include "rvq_codec.hpp"
#include "udse_model.hpp"

namespace udse::config {

enum class Profile { kDesk, kPaper };

Profile ParseProfile(const std::string& name);
const char* ProfileName(Profile profile);

struct CodecSection {
  int stages = 4;
  int codebook_size = 64;
  int feature_dim = 320;
  int frame_length = 640;
  int sample_rate = 16000;
  std::uint64_t seed = 1;
  int kmeans_iterations = 50;
  std::string checkpoint;  // defaults to <work_dir>/codec.udsecdc
};

struct OptimSection {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.01;
  long warmup_steps = 100;
  long total_steps = 2000;
  /// When positive, total_steps = epochs * training items.
  int epochs = 0;
  double clip_norm = 0.0;
  std::uint64_t seed = 1;
};

struct DataSection {
  std::string work_dir = "runs/desk";
  /// Clean WAV directories; empty means synthesize speech-like clips.
  std::string clean_train_dir;
  std::string clean_test_dir;
  int synthetic_train_clips = 200;
  int synthetic_test_clips = 40;
  double synthetic_seconds = 1.0;
  std::vector<std::string> recipes = {"DN"};
  std::vector<std::string> noise_sources = {"white", "pink", "brown", "babble", "modulated"};
  /// Empty means the training noise sources.
  std::vector<std::string> test_noise_sources;
  std::string rir_source = "synthetic";
  int bwe_hz = 2000;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct EvalSection {
  std::uint64_t seed = 1;
  int lsd_frame_length = 512;
  int lsd_hop = 128;
  bool oracle_tokens = false;
  std::string report;           // defaults to <work_dir>/eval_report.tsv
  std::string spectrogram_dir;  // empty disables dumps
};

struct RunConfig {
  Profile profile = Profile::kDesk;
  CodecSection codec;
  model::ModelConfig model;
  std::string model_checkpoint;  // defaults to <work_dir>/model.udsenn
  OptimSection optim;
  DataSection data;
  EvalSection eval;

  bool operator==(const RunConfig&) const;

  // Resolved artifact locations.
  std::string CodecPath() const;
  std::string ModelPath() const;
  std::string ReportPath() const;
  std::string CleanDir(corpus::Split split) const;
  std::string CorpusDir(corpus::Split split) const;
  std::string ManifestPath(corpus::Split split) const;

  rvq::CodecTrainConfig CodecTraining() const;
  nn::AdamWConfig Optimizer(long total_steps) const;
  corpus::RecipeOptions Recipes(corpus::Split split) const;
  synth::SpeechConfig Speech() const;
};

/// Built-in defaults for a profile. The paper profile carries the published
/// hyperparameters and is far too large for CI.
RunConfig Defaults(Profile profile);

/// Parses "[section]" headers and "key = value" lines ('#' starts a comment)
/// over the defaults of `profile`, or of the profile named by a top-level
/// "profile = ..." line. Unknown keys, malformed lines and inconsistent
/// values raise ConfigError naming the line and key path.
RunConfig Parse(const std::string& text, const std::string& origin = "config",
                const Profile* profile = nullptr);
RunConfig Load(const std::string& path, const Profile* profile = nullptr);

/// Every key with its resolved value; Parse(Format(c)) == c.
std::string Format(const RunConfig& cfg);

/// Cross-field checks (shared by Parse).
void Validate(const RunConfig& cfg);

}  // namespace udse::config

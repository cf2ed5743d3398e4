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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "audio_io.hpp"
#include "nn/layers.hpp"
#include "nn/optim.hpp"
#include "rvq_codec.hpp"

namespace udse::model {

using rvq::FeatureMatrix;
using rvq::TokenGrid;

enum class Conditioning { kConcat, kAdd };

struct ModelConfig {
  int channels = 64;
  int heads = 4;
  int global_blocks = 2;     // B_G
  int predictor_blocks = 2;  // B_T
  int conv_kernel = 7;
  int ffn_expansion = 4;
  bool use_conv = true;
  /// Every stage sees only the random initial input and G.
  bool parallel_mode = false;
  /// Stages after the first get zeros in place of G.
  bool global_condition_first_only = false;
  Conditioning conditioning = Conditioning::kConcat;
  /// Reuse one initial token sequence for every utterance instead of drawing
  /// it from the per-call seed.
  bool fixed_initial_tokens = false;
  std::uint64_t init_seed = 1;

  bool operator==(const ModelConfig&) const = default;
};

/// Feature processor, cascade of token predictors and the random initial
/// codebook, bound to one codec by content hash.
class UdseModel {
 public:
  UdseModel(const ModelConfig& cfg, const rvq::Codec& codec);

  const ModelConfig& config() const { return cfg_; }
  int stages() const { return stages_; }
  int codebook_size() const { return codebook_size_; }
  int feature_dim() const { return feature_dim_; }
  std::uint64_t codec_hash() const { return codec_hash_; }
  const rvq::Codebook& init_codebook() const { return init_codebook_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  /// Throws ConfigError naming both hashes when `codec` is not the bound one.
  void CheckCodec(const rvq::Codec& codec) const;

  /// Zeroes the output projections of every conformer block.
  void ZeroBlockOutputs();

  // Graph-level pieces shared by training and inference.
  nn::Graph::Node GlobalFeature(nn::Graph& g, const FeatureMatrix& features,
                                std::span<const FeatureMatrix> quantized) const;
  nn::Graph::Node StageLogits(nn::Graph& g, int stage, nn::Graph::Node global,
                              const FeatureMatrix& stage_input) const;
  /// Lookup of the initial codebook at seeded random tokens (K x frames).
  FeatureMatrix InitialInput(Eigen::Index frames, std::uint64_t seed) const;
  /// Input of `stage` (1-based) given the tokens of earlier stages.
  FeatureMatrix StageInput(const rvq::Codec& codec, int stage, const TokenGrid& tokens,
                           const FeatureMatrix& initial) const;

  // Value-level operations.
  Eigen::MatrixXd ExtractGlobal(const FeatureMatrix& features,
                                std::span<const FeatureMatrix> quantized) const;

  struct Prediction {
    TokenGrid tokens;
    std::vector<Eigen::MatrixXd> logits;  // per stage, M x L
  };
  /// Greedy cascade. `forced`, if given, overrides selected tokens: entries
  /// greater than zero replace the argmax at that (stage, frame).
  Prediction PredictTokens(const rvq::Codec& codec, const Eigen::MatrixXd& global,
                           std::uint64_t seed, const TokenGrid* forced = nullptr) const;
  /// Stage inputs built from ground-truth tokens.
  std::vector<Eigen::MatrixXd> TeacherForcedLogits(const rvq::Codec& codec,
                                                   const Eigen::MatrixXd& global,
                                                   const TokenGrid& gt, std::uint64_t seed) const;

  std::vector<std::uint8_t> Serialize() const;
  static UdseModel Deserialize(std::span<const std::uint8_t> bytes, const rvq::Codec& codec);
  void Save(const std::string& path) const;
  static UdseModel Load(const std::string& path, const rvq::Codec& codec);

  bool operator==(const UdseModel& other) const;

 private:
  struct Predictor {
    nn::Linear input;
    std::vector<nn::ConformerLiteBlock> blocks;
    nn::Linear head;
  };

  void Build();

  ModelConfig cfg_;
  int stages_ = 0;
  int codebook_size_ = 0;
  int feature_dim_ = 0;
  std::uint64_t codec_hash_ = 0;
  rvq::Codebook init_codebook_;
  nn::ParameterSet params_;
  nn::Linear global_input_;
  std::vector<nn::ConformerLiteBlock> global_blocks_;
  std::vector<Predictor> predictors_;
};

/// Mean over stages and frames of -log probs[gt] (probs are per-stage M x L).
double UdseLoss(std::span<const Eigen::MatrixXd> probs, const TokenGrid& gt);

/// Codec views of one (clean, degraded) pair, computed once.
struct TrainExample {
  std::string id;
  FeatureMatrix features;                 // E of the degraded input
  std::vector<FeatureMatrix> quantized;   // its per-stage quantized outputs
  TokenGrid clean_tokens;
};

TrainExample PrepareExample(const rvq::Codec& codec, const Waveform& clean,
                            const Waveform& degraded, std::string id = {});

struct TrainConfig {
  nn::AdamWConfig optim;
  long steps = 2000;
  std::uint64_t seed = 1;
};

struct StepRecord {
  long step = 0;
  int epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  long steps = 0;
  double mean_loss = 0.0;
  std::vector<double> token_accuracy;  // teacher-forced argmax accuracy per stage
};

struct TrainLog {
  double initial_loss = 0.0;  // teacher-forced loss over the data before step 1
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  std::string Format() const;
};

/// One utterance per step, epochs in seeded shuffled order. The codec is
/// never modified; parameters are rounded to float32 at the end so that a
/// saved and reloaded model equals the trained one.
TrainLog Train(UdseModel& model, const rvq::Codec& codec, std::span<const TrainExample> data,
               const TrainConfig& cfg,
               const std::function<void(const StepRecord&)>& progress = {});

/// Mean teacher-forced loss and per-stage argmax accuracy over the data.
struct LossReport {
  double loss = 0.0;
  std::vector<double> token_accuracy;
};
LossReport EvaluateLoss(const UdseModel& model, const rvq::Codec& codec,
                        std::span<const TrainExample> data, std::uint64_t seed);

struct Enhancement {
  Waveform audio;
  TokenGrid tokens;
};

/// Encode, quantize, extract G, predict tokens, dequantize all stages and
/// decode. `override_tokens` replaces the predicted grid when given.
Enhancement Enhance(const UdseModel& model, const rvq::Codec& codec, const Waveform& degraded,
                    std::uint64_t seed, const TokenGrid* override_tokens = nullptr);

}  // namespace udse::model

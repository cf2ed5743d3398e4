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

#include "udse_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "error.hpp"
#include "nn/loss.hpp"
#include "rng.hpp"

namespace udse::model {
namespace {

constexpr char kModelMagic[] = "UDSENN01";
constexpr std::uint32_t kModelVersion = 1;
constexpr const char* kInitCodebookName = "init_codebook";

std::vector<int> Row(const TokenGrid& grid, Eigen::Index n) {
  std::vector<int> row(static_cast<std::size_t>(grid.cols()));
  for (Eigen::Index l = 0; l < grid.cols(); ++l) row[static_cast<std::size_t>(l)] = grid(n, l);
  return row;
}

Eigen::MatrixXd RoundedNormal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<float>(rng.Normal());
  }
  return m;
}

void CheckDims(const ModelConfig& cfg) {
  if (cfg.channels < 1 || cfg.heads < 1 || cfg.channels % cfg.heads != 0) {
    throw ConfigError("model.channels must be a positive multiple of model.heads");
  }
  if (cfg.global_blocks < 0 || cfg.predictor_blocks < 0) {
    throw ConfigError("block counts must be non-negative");
  }
}

}  // namespace

UdseModel::UdseModel(const ModelConfig& cfg, const rvq::Codec& codec)
    : cfg_(cfg),
      stages_(codec.stages()),
      codebook_size_(codec.codebook_size()),
      feature_dim_(codec.feature_dim()),
      codec_hash_(codec.ContentHash()) {
  CheckDims(cfg_);
  Build();
}

void UdseModel::Build() {
  Rng cb_rng(DeriveSeed(cfg_.init_seed, 0));
  init_codebook_ = rvq::Codebook(RoundedNormal(feature_dim_, codebook_size_, cb_rng));

  Rng rng(DeriveSeed(cfg_.init_seed, 1));
  nn::BlockConfig block{cfg_.channels, cfg_.heads, cfg_.conv_kernel, cfg_.ffn_expansion,
                        cfg_.use_conv};
  const int c = cfg_.channels;
  global_input_ = nn::Linear::Create(params_, "fp.input", (stages_ + 1) * feature_dim_, c, rng);
  for (int b = 0; b < cfg_.global_blocks; ++b) {
    global_blocks_.emplace_back(params_, "fp.block" + std::to_string(b), block, rng);
  }
  for (int n = 1; n <= stages_; ++n) {
    const std::string prefix = "tp" + std::to_string(n);
    Predictor p;
    const int in = cfg_.conditioning == Conditioning::kConcat ? feature_dim_ + c : feature_dim_;
    p.input = nn::Linear::Create(params_, prefix + ".input", in, c, rng);
    for (int b = 0; b < cfg_.predictor_blocks; ++b) {
      p.blocks.emplace_back(params_, prefix + ".block" + std::to_string(b), block, rng);
    }
    p.head = nn::Linear::Create(params_, prefix + ".head", c, codebook_size_, rng);
    predictors_.push_back(std::move(p));
  }
  params_.RoundToFloat();
}

void UdseModel::CheckCodec(const rvq::Codec& codec) const {
  const std::uint64_t actual = codec.ContentHash();
  if (actual != codec_hash_) {
    throw ConfigError("codec hash mismatch: model expects " + HexDigest(codec_hash_) +
                      " but codec is " + HexDigest(actual));
  }
}

void UdseModel::ZeroBlockOutputs() {
  for (const auto& b : global_blocks_) b.ZeroOutputProjections(params_);
  for (const auto& p : predictors_) {
    for (const auto& b : p.blocks) b.ZeroOutputProjections(params_);
  }
}

nn::Graph::Node UdseModel::GlobalFeature(nn::Graph& g, const FeatureMatrix& features,
                                         std::span<const FeatureMatrix> quantized) const {
  if (static_cast<int>(quantized.size()) != stages_) {
    throw ConfigError("global feature needs exactly " + std::to_string(stages_) +
                      " quantized stages, got " + std::to_string(quantized.size()));
  }
  if (features.rows() != feature_dim_) throw ConfigError("feature dimension mismatch");
  Eigen::MatrixXd stacked((stages_ + 1) * feature_dim_, features.cols());
  stacked.topRows(feature_dim_) = features;
  for (int n = 0; n < stages_; ++n) {
    if (quantized[n].rows() != feature_dim_ || quantized[n].cols() != features.cols()) {
      throw ConfigError("quantized stage shape mismatch");
    }
    stacked.middleRows((n + 1) * feature_dim_, feature_dim_) = quantized[n];
  }
  auto h = global_input_.Apply(g, g.Constant(std::move(stacked)));
  for (const auto& b : global_blocks_) h = b.Apply(g, h);
  return h;
}

nn::Graph::Node UdseModel::StageLogits(nn::Graph& g, int stage, nn::Graph::Node global,
                                       const FeatureMatrix& stage_input) const {
  if (stage < 1 || stage > stages_) throw RangeError("stage out of range");
  const Predictor& p = predictors_[stage - 1];
  const Eigen::Index frames = stage_input.cols();
  const auto cond = (cfg_.global_condition_first_only && stage > 1)
                        ? g.Constant(Eigen::MatrixXd::Zero(cfg_.channels, frames))
                        : global;
  nn::Graph::Node h;
  if (cfg_.conditioning == Conditioning::kConcat) {
    const nn::Graph::Node parts[] = {g.Constant(stage_input), cond};
    h = p.input.Apply(g, g.ConcatRows(parts));
  } else {
    h = g.Add(p.input.Apply(g, g.Constant(stage_input)), cond);
  }
  for (const auto& b : p.blocks) h = b.Apply(g, h);
  return p.head.Apply(g, h);
}

FeatureMatrix UdseModel::InitialInput(Eigen::Index frames, std::uint64_t seed) const {
  Rng rng(cfg_.fixed_initial_tokens ? DeriveSeed(cfg_.init_seed, 2) : seed);
  std::vector<int> tokens(static_cast<std::size_t>(frames));
  for (auto& t : tokens) t = static_cast<int>(rng.Below(codebook_size_)) + 1;
  return rvq::Lookup(init_codebook_, tokens);
}

FeatureMatrix UdseModel::StageInput(const rvq::Codec& codec, int stage, const TokenGrid& tokens,
                                    const FeatureMatrix& initial) const {
  if (stage == 1 || cfg_.parallel_mode) return initial;
  FeatureMatrix sum = FeatureMatrix::Zero(feature_dim_, tokens.cols());
  for (int k = 0; k < stage - 1; ++k) sum += rvq::Lookup(codec.stage(k), Row(tokens, k));
  return sum;
}

Eigen::MatrixXd UdseModel::ExtractGlobal(const FeatureMatrix& features,
                                         std::span<const FeatureMatrix> quantized) const {
  // Inference graphs only read parameter values.
  nn::Graph g(const_cast<nn::ParameterSet*>(&params_));
  return g.value(GlobalFeature(g, features, quantized));
}

UdseModel::Prediction UdseModel::PredictTokens(const rvq::Codec& codec,
                                               const Eigen::MatrixXd& global, std::uint64_t seed,
                                               const TokenGrid* forced) const {
  if (!global.allFinite()) throw DegenerateInput("global feature is not finite");
  const Eigen::Index frames = global.cols();
  if (forced && (forced->rows() != stages_ || forced->cols() != frames)) {
    throw ConfigError("forced token grid has the wrong shape");
  }
  nn::Graph g(const_cast<nn::ParameterSet*>(&params_));
  const auto G = g.Constant(global);
  const FeatureMatrix initial = InitialInput(frames, seed);
  Prediction out;
  out.tokens = TokenGrid::Zero(stages_, frames);
  for (int n = 1; n <= stages_; ++n) {
    const FeatureMatrix input = StageInput(codec, n, out.tokens, initial);
    Eigen::MatrixXd logits = g.value(StageLogits(g, n, G, input));
    for (Eigen::Index l = 0; l < frames; ++l) {
      const int f = forced ? (*forced)(n - 1, l) : 0;
      if (f > codebook_size_) throw RangeError("forced token out of range");
      out.tokens(n - 1, l) = f > 0 ? f : nn::ArgmaxColumn(logits, l);
    }
    out.logits.push_back(std::move(logits));
  }
  return out;
}

std::vector<Eigen::MatrixXd> UdseModel::TeacherForcedLogits(const rvq::Codec& codec,
                                                            const Eigen::MatrixXd& global,
                                                            const TokenGrid& gt,
                                                            std::uint64_t seed) const {
  if (gt.rows() != stages_ || gt.cols() != global.cols()) {
    throw ConfigError("ground-truth grid has the wrong shape");
  }
  codec.ValidateGrid(gt);
  nn::Graph g(const_cast<nn::ParameterSet*>(&params_));
  const auto G = g.Constant(global);
  const FeatureMatrix initial = InitialInput(global.cols(), seed);
  std::vector<Eigen::MatrixXd> logits;
  for (int n = 1; n <= stages_; ++n) {
    logits.push_back(g.value(StageLogits(g, n, G, StageInput(codec, n, gt, initial))));
  }
  return logits;
}

std::vector<std::uint8_t> UdseModel::Serialize() const {
  ByteWriter out;
  out.Bytes(std::string_view(kModelMagic, 8));
  const std::size_t payload = out.size();
  out.U32(kModelVersion);
  out.U32(static_cast<std::uint32_t>(cfg_.channels));
  out.U32(static_cast<std::uint32_t>(cfg_.heads));
  out.U32(static_cast<std::uint32_t>(cfg_.global_blocks));
  out.U32(static_cast<std::uint32_t>(cfg_.predictor_blocks));
  out.U32(static_cast<std::uint32_t>(cfg_.conv_kernel));
  out.U32(static_cast<std::uint32_t>(cfg_.ffn_expansion));
  std::uint32_t flags = 0;
  flags |= cfg_.use_conv ? 1u : 0u;
  flags |= cfg_.parallel_mode ? 2u : 0u;
  flags |= cfg_.global_condition_first_only ? 4u : 0u;
  flags |= cfg_.conditioning == Conditioning::kAdd ? 8u : 0u;
  flags |= cfg_.fixed_initial_tokens ? 16u : 0u;
  out.U32(flags);
  out.U64(cfg_.init_seed);
  out.U32(static_cast<std::uint32_t>(stages_));
  out.U32(static_cast<std::uint32_t>(codebook_size_));
  out.U32(static_cast<std::uint32_t>(feature_dim_));
  out.U64(codec_hash_);

  auto block = [&](const std::string& name, const Eigen::MatrixXd& m) {
    out.U16(static_cast<std::uint16_t>(name.size()));
    out.Bytes(name);
    out.U32(static_cast<std::uint32_t>(m.rows()));
    out.U32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) out.F32(static_cast<float>(m(i, j)));
    }
  };
  out.U32(static_cast<std::uint32_t>(params_.size() + 1));
  block(kInitCodebookName, init_codebook_.codewords());
  for (int i = 0; i < params_.size(); ++i) block(params_[i].name, params_[i].value);
  const auto& bytes = out.data();
  out.U64(Fnv1a64(std::span(bytes).subspan(payload)));
  return out.data();
}

UdseModel UdseModel::Deserialize(std::span<const std::uint8_t> bytes, const rvq::Codec& codec) {
  if (bytes.size() < 16 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 8) !=
                               std::string_view(kModelMagic, 8)) {
    throw ParseError(0, "not a UDSE model checkpoint");
  }
  const std::uint64_t expected = Fnv1a64(bytes.subspan(8, bytes.size() - 16));
  ByteReader tail(bytes.subspan(bytes.size() - 8));
  if (tail.U64() != expected) throw ParseError(bytes.size() - 8, "model checkpoint checksum mismatch");

  ByteReader in(bytes.subspan(0, bytes.size() - 8));
  in.Skip(8);
  if (in.U32() != kModelVersion) throw UnsupportedFormat("unsupported model checkpoint version");
  ModelConfig cfg;
  cfg.channels = static_cast<int>(in.U32());
  cfg.heads = static_cast<int>(in.U32());
  cfg.global_blocks = static_cast<int>(in.U32());
  cfg.predictor_blocks = static_cast<int>(in.U32());
  cfg.conv_kernel = static_cast<int>(in.U32());
  cfg.ffn_expansion = static_cast<int>(in.U32());
  const std::uint32_t flags = in.U32();
  cfg.use_conv = flags & 1u;
  cfg.parallel_mode = flags & 2u;
  cfg.global_condition_first_only = flags & 4u;
  cfg.conditioning = (flags & 8u) ? Conditioning::kAdd : Conditioning::kConcat;
  cfg.fixed_initial_tokens = flags & 16u;
  cfg.init_seed = in.U64();
  const int stages = static_cast<int>(in.U32());
  const int m = static_cast<int>(in.U32());
  const int k = static_cast<int>(in.U32());
  const std::uint64_t hash = in.U64();
  const std::uint64_t actual = codec.ContentHash();
  if (hash != actual) {
    throw ConfigError("codec hash mismatch: model expects " + HexDigest(hash) +
                      " but codec is " + HexDigest(actual));
  }
  if (stages != codec.stages() || m != codec.codebook_size() || k != codec.feature_dim()) {
    throw ConfigError("model dimensions do not match the codec");
  }
  UdseModel model(cfg, codec);

  const std::uint32_t count = in.U32();
  if (count != static_cast<std::uint32_t>(model.params_.size() + 1)) {
    throw ParseError(in.pos(), "unexpected parameter block count");
  }
  std::vector<char> seen(static_cast<std::size_t>(model.params_.size()), 0);
  for (std::uint32_t b = 0; b < count; ++b) {
    const std::size_t at = in.pos();
    const std::uint16_t len = in.U16();
    const auto name_bytes = in.Bytes(len);
    const std::string name(name_bytes.begin(), name_bytes.end());
    const auto rows = static_cast<Eigen::Index>(in.U32());
    const auto cols = static_cast<Eigen::Index>(in.U32());
    Eigen::MatrixXd value(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) value(i, j) = in.F32();
    }
    if (name == kInitCodebookName) {
      if (rows != k || cols != m) throw ParseError(at, "initial codebook has the wrong shape");
      model.init_codebook_ = rvq::Codebook(std::move(value));
      continue;
    }
    const int index = model.params_.Find(name);
    if (index < 0) throw ParseError(at, "unknown parameter block '" + name + "'");
    if (seen[index]) throw ParseError(at, "duplicate parameter block '" + name + "'");
    auto& p = model.params_[index];
    if (p.value.rows() != rows || p.value.cols() != cols) {
      throw ParseError(at, "parameter block '" + name + "' has the wrong shape");
    }
    p.value = std::move(value);
    seen[index] = 1;
  }
  if (in.remaining() != 0) throw ParseError(in.pos(), "trailing bytes in model checkpoint");
  return model;
}

void UdseModel::Save(const std::string& path) const { WriteFileAtomic(path, Serialize()); }

UdseModel UdseModel::Load(const std::string& path, const rvq::Codec& codec) {
  return Deserialize(ReadFileBytes(path), codec);
}

bool UdseModel::operator==(const UdseModel& other) const {
  return cfg_ == other.cfg_ && stages_ == other.stages_ &&
         codebook_size_ == other.codebook_size_ && feature_dim_ == other.feature_dim_ &&
         codec_hash_ == other.codec_hash_ && init_codebook_ == other.init_codebook_ &&
         params_ == other.params_;
}

double UdseLoss(std::span<const Eigen::MatrixXd> probs, const TokenGrid& gt) {
  if (static_cast<Eigen::Index>(probs.size()) != gt.rows()) {
    throw ConfigError("one probability grid per stage required");
  }
  if (gt.size() == 0) return 0.0;
  double sum = 0.0;
  for (Eigen::Index n = 0; n < gt.rows(); ++n) {
    sum += nn::CrossEntropy(probs[static_cast<std::size_t>(n)], Row(gt, n));
  }
  // Each stage term is already a mean over L frames.
  return sum / static_cast<double>(gt.rows());
}

TrainExample PrepareExample(const rvq::Codec& codec, const Waveform& clean,
                            const Waveform& degraded, std::string id) {
  if (clean.size() != degraded.size()) throw ConfigError("clean and degraded lengths differ");
  TrainExample ex;
  ex.id = std::move(id);
  ex.features = codec.Encode(degraded);
  auto q = codec.Quantize(ex.features);
  ex.quantized = std::move(q.quantized);
  ex.clean_tokens = codec.Quantize(codec.Encode(clean)).grid;
  return ex;
}

namespace {

struct StepResult {
  double loss = 0.0;
  std::vector<long> hits;
};

// Teacher-forced forward pass; leaves gradients in the graph when asked.
StepResult ForwardTeacherForced(const UdseModel& model, const rvq::Codec& codec,
                                const TrainExample& ex, std::uint64_t seed, nn::Graph& g,
                                bool backward) {
  const int stages = model.stages();
  const Eigen::Index frames = ex.features.cols();
  if (ex.clean_tokens.rows() != stages || ex.clean_tokens.cols() != frames) {
    throw ConfigError("example '" + ex.id + "' does not match the codec frame layout");
  }
  const auto G = model.GlobalFeature(g, ex.features, ex.quantized);
  const FeatureMatrix initial = model.InitialInput(frames, seed);
  const double weight = 1.0 / static_cast<double>(stages * frames);
  StepResult r;
  r.hits.assign(static_cast<std::size_t>(stages), 0);
  nn::Graph::Node total = -1;
  for (int n = 1; n <= stages; ++n) {
    const auto logits =
        model.StageLogits(g, n, G, model.StageInput(codec, n, ex.clean_tokens, initial));
    const auto targets = Row(ex.clean_tokens, n - 1);
    const auto ce = g.SoftmaxCrossEntropy(logits, targets, weight);
    total = total < 0 ? ce : g.Add(total, ce);
    const auto& z = g.value(logits);
    for (Eigen::Index l = 0; l < frames; ++l) {
      r.hits[n - 1] += nn::ArgmaxColumn(z, l) == targets[static_cast<std::size_t>(l)];
    }
  }
  r.loss = g.value(total)(0, 0);
  if (backward) g.Backward(total);
  return r;
}

void CheckData(const UdseModel& model, const rvq::Codec& codec,
               std::span<const TrainExample> data) {
  model.CheckCodec(codec);
  for (const auto& ex : data) {
    if (static_cast<int>(ex.quantized.size()) != model.stages() ||
        ex.features.rows() != model.feature_dim() || ex.clean_tokens.rows() != model.stages() ||
        ex.clean_tokens.cols() != ex.features.cols()) {
      throw ConfigError("training example '" + ex.id + "' does not match the codec");
    }
  }
}

}  // namespace

LossReport EvaluateLoss(const UdseModel& model, const rvq::Codec& codec,
                        std::span<const TrainExample> data, std::uint64_t seed) {
  CheckData(model, codec, data);
  LossReport report;
  report.token_accuracy.assign(static_cast<std::size_t>(model.stages()), 0.0);
  if (data.empty()) return report;
  std::vector<long> hits(static_cast<std::size_t>(model.stages()), 0);
  long frames = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    nn::Graph g(const_cast<nn::ParameterSet*>(&model.params()));
    const auto r = ForwardTeacherForced(model, codec, data[i], DeriveSeed(seed, i), g, false);
    report.loss += r.loss;
    for (std::size_t n = 0; n < hits.size(); ++n) hits[n] += r.hits[n];
    frames += data[i].features.cols();
  }
  report.loss /= static_cast<double>(data.size());
  for (std::size_t n = 0; n < hits.size(); ++n) {
    report.token_accuracy[n] = static_cast<double>(hits[n]) / static_cast<double>(frames);
  }
  return report;
}

TrainLog Train(UdseModel& model, const rvq::Codec& codec, std::span<const TrainExample> data,
               const TrainConfig& cfg, const std::function<void(const StepRecord&)>& progress) {
  if (data.empty()) throw ConfigError("no training examples");
  if (cfg.steps < 1) throw ConfigError("training needs at least one step");
  CheckData(model, codec, data);
  const std::uint64_t codec_before = codec.ContentHash();

  TrainLog log;
  log.initial_loss = EvaluateLoss(model, codec, data, DeriveSeed(cfg.seed, 1)).loss;

  nn::AdamWConfig optim = cfg.optim;
  if (optim.total_steps <= 0) optim.total_steps = cfg.steps;
  nn::AdamW opt(optim, model.params());
  Rng order_rng(DeriveSeed(cfg.seed, 2));
  const std::uint64_t init_stream = DeriveSeed(cfg.seed, 3);

  std::vector<std::size_t> order(data.size());
  EpochRecord epoch;
  std::vector<long> hits(static_cast<std::size_t>(model.stages()), 0);
  long frames = 0;
  std::size_t cursor = order.size();
  auto close_epoch = [&] {
    if (epoch.steps == 0) return;
    epoch.mean_loss /= static_cast<double>(epoch.steps);
    epoch.token_accuracy.resize(hits.size());
    for (std::size_t n = 0; n < hits.size(); ++n) {
      epoch.token_accuracy[n] = static_cast<double>(hits[n]) / static_cast<double>(frames);
    }
    log.epochs.push_back(epoch);
  };

  for (long step = 1; step <= cfg.steps; ++step) {
    if (cursor == order.size()) {
      close_epoch();
      epoch = EpochRecord{static_cast<int>(log.epochs.size()) + 1, 0, 0.0, {}};
      std::fill(hits.begin(), hits.end(), 0);
      frames = 0;
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[order_rng.Below(i)]);
      }
      cursor = 0;
    }
    const TrainExample& ex = data[order[cursor++]];
    model.params().ZeroGrad();
    nn::Graph g(&model.params());
    const auto r = ForwardTeacherForced(model, codec, ex,
                                        DeriveSeed(init_stream, static_cast<std::uint64_t>(step)),
                                        g, true);
    const double lr = opt.Step(model.params());
    StepRecord rec{step, epoch.epoch, r.loss, lr};
    log.steps.push_back(rec);
    epoch.steps += 1;
    epoch.mean_loss += r.loss;
    for (std::size_t n = 0; n < hits.size(); ++n) hits[n] += r.hits[n];
    frames += ex.features.cols();
    if (progress) progress(rec);
  }
  close_epoch();
  model.params().RoundToFloat();

  if (codec.ContentHash() != codec_before) throw Error(ErrorKind::kRuntime, "codec changed during training");
  return log;
}

std::string TrainLog::Format() const {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "initial_loss\t%.9g\n", initial_loss);
  out << buf;
  out << "epoch\tsteps\tmean_loss";
  const std::size_t stages = epochs.empty() ? 0 : epochs.front().token_accuracy.size();
  for (std::size_t n = 0; n < stages; ++n) out << "\tacc" << n + 1;
  out << '\n';
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%d\t%ld\t%.9g", e.epoch, e.steps, e.mean_loss);
    out << buf;
    for (double a : e.token_accuracy) {
      std::snprintf(buf, sizeof buf, "\t%.6f", a);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

Enhancement Enhance(const UdseModel& model, const rvq::Codec& codec, const Waveform& degraded,
                    std::uint64_t seed, const TokenGrid* override_tokens) {
  ValidateWaveform(degraded);
  model.CheckCodec(codec);
  const FeatureMatrix features = codec.Encode(degraded);
  Enhancement out;
  if (override_tokens) {
    out.tokens = *override_tokens;
  } else {
    const auto q = codec.Quantize(features);
    out.tokens = model.PredictTokens(codec, model.ExtractGlobal(features, q.quantized), seed).tokens;
  }
  out.audio = codec.Decode(out.tokens, degraded.size());
  return out;
}

}  // namespace udse::model

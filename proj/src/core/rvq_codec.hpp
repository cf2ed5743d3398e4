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
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "audio_io.hpp"

namespace udse::rvq {

/// K x L real matrix: encoded features, residuals and quantized outputs.
using FeatureMatrix = Eigen::MatrixXd;

/// M codewords of dimension K, stored one codeword per column (K x M).
/// Tokens are 1-based: token m selects column m - 1.
class Codebook {
 public:
  Codebook() = default;
  explicit Codebook(Eigen::MatrixXd codewords);

  int size() const { return static_cast<int>(codewords_.cols()); }
  int dim() const { return static_cast<int>(codewords_.rows()); }
  auto codeword(int token) const { return codewords_.col(token - 1); }
  const Eigen::MatrixXd& codewords() const { return codewords_; }

  bool operator==(const Codebook& other) const { return codewords_ == other.codewords_; }

 private:
  Eigen::MatrixXd codewords_;
};

/// N x L grid of 1-based tokens.
using TokenGrid = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using TokenRow = std::vector<int>;

struct StageOutput {
  TokenRow tokens;
  FeatureMatrix quantized;
};

/// Nearest codeword per column by squared Euclidean distance; ties go to the
/// lowest token.
StageOutput QuantizeStage(const Codebook& cb, const FeatureMatrix& input);
int NearestToken(const Codebook& cb, const double* column);
FeatureMatrix Lookup(const Codebook& cb, std::span<const int> tokens);

struct CodecMetadata {
  int frame_length = 640;
  int sample_rate_hz = 16000;
  std::uint64_t training_seed = 0;

  bool operator==(const CodecMetadata&) const = default;
};

struct QuantizeResult {
  TokenGrid grid;
  std::vector<FeatureMatrix> quantized;  // Q~_1 .. Q~_N
  std::vector<FeatureMatrix> residuals;  // Q_1 .. Q_{N+1}; Q_1 is the input
};

/// Frozen MDCT + residual-VQ codec. Immutable after construction.
class Codec {
 public:
  Codec(std::vector<Codebook> stages, Eigen::VectorXd mean, Eigen::VectorXd scale,
        CodecMetadata meta);

  int stages() const { return static_cast<int>(stages_.size()); }
  int codebook_size() const { return stages_.front().size(); }
  int feature_dim() const { return stages_.front().dim(); }
  const Codebook& stage(int index) const { return stages_.at(index); }
  const CodecMetadata& metadata() const { return meta_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& scale() const { return scale_; }

  /// MDCT analysis followed by the stored per-dimension affine normalization.
  FeatureMatrix Encode(const Waveform& w) const;
  std::size_t FrameCount(std::size_t length) const;

  /// Residual cascade: stage 1 sees E, stage n sees the residual of n - 1.
  QuantizeResult Quantize(const FeatureMatrix& features, int stages_used = -1) const;

  /// Elementwise sum of the first `stages_used` per-stage lookups.
  FeatureMatrix Dequantize(const TokenGrid& grid, int stages_used = -1) const;

  /// De-normalize and run IMDCT synthesis, trimmed to `length` samples.
  Waveform Synthesize(const FeatureMatrix& features, std::size_t length) const;
  Waveform Decode(const TokenGrid& grid, std::size_t length, int stages_used = -1) const;

  /// Encode, quantize and decode with the first `stages_used` stages.
  Waveform RoundTrip(const Waveform& w, int stages_used = -1) const;

  void ValidateGrid(const TokenGrid& grid) const;

  std::vector<std::uint8_t> Serialize() const;
  static Codec Deserialize(std::span<const std::uint8_t> bytes);
  void Save(const std::string& path) const;
  static Codec Load(const std::string& path);
  /// FNV-1a of the serialized checkpoint.
  std::uint64_t ContentHash() const;

  bool operator==(const Codec& other) const;

 private:
  int ResolveStages(int stages_used) const;

  std::vector<Codebook> stages_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;
  CodecMetadata meta_;
};

struct KmeansResult {
  Eigen::MatrixXd centroids;  // K x M
  double inertia = 0.0;
  int iterations = 0;
};

struct KmeansOptions {
  int max_iterations = 50;
  double tolerance = 1e-6;  // relative inertia change
  /// Keep centroid 0 fixed at the origin.
  bool pin_zero = false;
};

/// Lloyd k-means with k-means++ seeding. Points are columns of `data`.
/// Empty clusters are re-seeded to the point farthest from its centroid.
KmeansResult Kmeans(const Eigen::MatrixXd& data, int clusters, std::uint64_t seed,
                    const KmeansOptions& options = {});

struct CodecTrainConfig {
  int stages = 4;
  int codebook_size = 64;
  int frame_length = 640;
  int sample_rate_hz = 16000;
  std::uint64_t seed = 1;
  KmeansOptions kmeans{50, 1e-6, true};
};

/// Stage-wise k-means: stage n is fit on the residual left by stages < n.
/// Requires at least 10 * M training frames.
std::vector<Codebook> TrainCodebooks(const FeatureMatrix& features, int stages,
                                     int codebook_size, std::uint64_t seed,
                                     const KmeansOptions& options = {50, 1e-6, true});

/// Fits the normalization statistics and codebooks on a set of clips.
Codec TrainCodec(std::span<const Waveform> clips, const CodecTrainConfig& cfg);

}  // namespace udse::rvq

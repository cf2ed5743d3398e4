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

#include "rvq_codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "dsp.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace udse::rvq {
namespace {

constexpr char kCodecMagic[] = "UDSECDC1";

Eigen::MatrixXd RoundToFloat(const Eigen::MatrixXd& m) {
  return m.cast<float>().cast<double>();
}

// Squared distance with a fixed left-to-right summation order, so results
// are reproducible bit for bit and comparable with a naive reference.
double SquaredDistance(const double* a, const double* b, int dim) {
  double acc = 0.0;
  for (int k = 0; k < dim; ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

}  // namespace

Codebook::Codebook(Eigen::MatrixXd codewords) : codewords_(std::move(codewords)) {
  if (codewords_.cols() < 1 || codewords_.rows() < 1) {
    throw ConfigError("codebook must have at least one codeword of positive dimension");
  }
  if (!codewords_.allFinite()) throw ConfigError("codebook contains non-finite values");
}

int NearestToken(const Codebook& cb, const double* column) {
  const int dim = cb.dim();
  const double* base = cb.codewords().data();
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int m = 0; m < cb.size(); ++m) {
    const double d = SquaredDistance(column, base + static_cast<std::ptrdiff_t>(m) * dim, dim);
    if (d < best_d) {  // strict: ties keep the lower index
      best_d = d;
      best = m;
    }
  }
  return best + 1;
}

StageOutput QuantizeStage(const Codebook& cb, const FeatureMatrix& input) {
  if (input.rows() != cb.dim()) {
    throw ConfigError("feature dimension " + std::to_string(input.rows()) +
                      " does not match codebook dimension " + std::to_string(cb.dim()));
  }
  StageOutput out;
  out.tokens.resize(static_cast<std::size_t>(input.cols()));
  out.quantized.resize(input.rows(), input.cols());
  for (Eigen::Index l = 0; l < input.cols(); ++l) {
    const int token = NearestToken(cb, input.col(l).data());
    out.tokens[static_cast<std::size_t>(l)] = token;
    out.quantized.col(l) = cb.codeword(token);
  }
  return out;
}

FeatureMatrix Lookup(const Codebook& cb, std::span<const int> tokens) {
  FeatureMatrix out(cb.dim(), static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t l = 0; l < tokens.size(); ++l) {
    const int t = tokens[l];
    if (t < 1 || t > cb.size()) {
      throw RangeError("token " + std::to_string(t) + " outside [1, " +
                       std::to_string(cb.size()) + "]");
    }
    out.col(static_cast<Eigen::Index>(l)) = cb.codeword(t);
  }
  return out;
}

Codec::Codec(std::vector<Codebook> stages, Eigen::VectorXd mean, Eigen::VectorXd scale,
             CodecMetadata meta)
    : stages_(std::move(stages)), mean_(std::move(mean)), scale_(std::move(scale)), meta_(meta) {
  if (stages_.empty()) throw ConfigError("codec needs at least one quantizer stage");
  const int m = stages_.front().size();
  const int k = stages_.front().dim();
  if (m < 2) throw ConfigError("codebook size must be at least 2");
  for (const auto& s : stages_) {
    if (s.size() != m || s.dim() != k) throw ConfigError("all stages must share M and K");
  }
  if (meta_.frame_length < 4 || meta_.frame_length % 2 != 0 || meta_.frame_length / 2 != k) {
    throw ConfigError("feature dimension K must equal frame_length / 2");
  }
  if (meta_.sample_rate_hz <= 0) throw ConfigError("codec sample rate must be positive");
  if (mean_.size() != k || scale_.size() != k) {
    throw ConfigError("normalization vectors must have K entries");
  }
  if (!mean_.allFinite() || !scale_.allFinite() || (scale_.array() <= 0).any()) {
    throw ConfigError("normalization scale must be finite and positive");
  }
}

int Codec::ResolveStages(int stages_used) const {
  if (stages_used < 0) return stages();
  if (stages_used < 1 || stages_used > stages()) {
    throw RangeError("stages_used must be in [1, " + std::to_string(stages()) + "]");
  }
  return stages_used;
}

std::size_t Codec::FrameCount(std::size_t length) const {
  return dsp::MdctFrameCount(length, meta_.frame_length);
}

FeatureMatrix Codec::Encode(const Waveform& w) const {
  ValidateWaveform(w);
  if (w.sample_rate_hz != meta_.sample_rate_hz) {
    throw ConfigError("waveform rate " + std::to_string(w.sample_rate_hz) +
                      " Hz does not match codec rate " +
                      std::to_string(meta_.sample_rate_hz) + " Hz");
  }
  auto frames = dsp::Mdct(w.samples, meta_.frame_length);
  FeatureMatrix e = frames.coeffs;
  e.colwise() -= mean_;
  e.array().colwise() /= scale_.array();
  return e;
}

QuantizeResult Codec::Quantize(const FeatureMatrix& features, int stages_used) const {
  const int n_used = ResolveStages(stages_used);
  if (features.rows() != feature_dim()) throw ConfigError("feature dimension mismatch");
  QuantizeResult r;
  r.grid.resize(n_used, features.cols());
  r.residuals.push_back(features);
  for (int n = 0; n < n_used; ++n) {
    StageOutput s = QuantizeStage(stages_[n], r.residuals.back());
    for (Eigen::Index l = 0; l < features.cols(); ++l) r.grid(n, l) = s.tokens[l];
    FeatureMatrix next = r.residuals.back() - s.quantized;
    r.quantized.push_back(std::move(s.quantized));
    r.residuals.push_back(std::move(next));
  }
  return r;
}

void Codec::ValidateGrid(const TokenGrid& grid) const {
  if (grid.rows() < 1 || grid.rows() > stages()) {
    throw ConfigError("token grid has " + std::to_string(grid.rows()) +
                      " stages, codec has " + std::to_string(stages()));
  }
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const int t = grid.data()[i];
    if (t < 1 || t > codebook_size()) {
      throw RangeError("token " + std::to_string(t) + " outside [1, " +
                       std::to_string(codebook_size()) + "]");
    }
  }
}

FeatureMatrix Codec::Dequantize(const TokenGrid& grid, int stages_used) const {
  const int n_used = stages_used < 0 ? static_cast<int>(grid.rows()) : ResolveStages(stages_used);
  if (n_used > grid.rows()) throw RangeError("grid has fewer stages than requested");
  FeatureMatrix sum = FeatureMatrix::Zero(feature_dim(), grid.cols());
  std::vector<int> row(static_cast<std::size_t>(grid.cols()));
  for (int n = 0; n < n_used; ++n) {
    for (Eigen::Index l = 0; l < grid.cols(); ++l) row[l] = grid(n, l);
    sum += Lookup(stages_[n], row);
  }
  return sum;
}

Waveform Codec::Synthesize(const FeatureMatrix& features, std::size_t length) const {
  if (features.rows() != feature_dim()) throw ConfigError("feature dimension mismatch");
  dsp::MdctFrames frames;
  frames.frame_length = meta_.frame_length;
  frames.length = length;
  frames.coeffs = features;
  frames.coeffs.array().colwise() *= scale_.array();
  frames.coeffs.colwise() += mean_;
  Waveform w;
  w.sample_rate_hz = meta_.sample_rate_hz;
  w.samples = dsp::Imdct(frames);
  return w;
}

Waveform Codec::Decode(const TokenGrid& grid, std::size_t length, int stages_used) const {
  ValidateGrid(grid);
  return Synthesize(Dequantize(grid, stages_used), length);
}

Waveform Codec::RoundTrip(const Waveform& w, int stages_used) const {
  const auto q = Quantize(Encode(w), stages_used);
  return Decode(q.grid, w.size());
}

std::vector<std::uint8_t> Codec::Serialize() const {
  ByteWriter out;
  out.Bytes(std::string_view(kCodecMagic, 8));
  const std::size_t payload_start = out.size();
  out.U32(static_cast<std::uint32_t>(stages()));
  out.U32(static_cast<std::uint32_t>(codebook_size()));
  out.U32(static_cast<std::uint32_t>(feature_dim()));
  out.U32(static_cast<std::uint32_t>(meta_.frame_length));
  out.U32(static_cast<std::uint32_t>(meta_.sample_rate_hz));
  out.U64(meta_.training_seed);
  for (Eigen::Index k = 0; k < mean_.size(); ++k) out.F32(static_cast<float>(mean_[k]));
  for (Eigen::Index k = 0; k < scale_.size(); ++k) out.F32(static_cast<float>(scale_[k]));
  for (const auto& s : stages_) {
    for (int m = 0; m < s.size(); ++m) {
      for (int k = 0; k < s.dim(); ++k) out.F32(static_cast<float>(s.codewords()(k, m)));
    }
  }
  const auto& bytes = out.data();
  const std::uint64_t checksum = Fnv1a64(std::span(bytes).subspan(payload_start));
  out.U64(checksum);
  return std::move(out.data());
}

Codec Codec::Deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 8 || r.Bytes(8) != std::string(kCodecMagic, 8)) {
    throw ParseError(0, "not a codec checkpoint (bad magic)");
  }
  if (bytes.size() < 8 + 8) throw ParseError(bytes.size(), "truncated codec checkpoint");
  const std::uint64_t expected = Fnv1a64(bytes.subspan(8, bytes.size() - 16));
  const int n = static_cast<int>(r.U32());
  const int m = static_cast<int>(r.U32());
  const int k = static_cast<int>(r.U32());
  CodecMetadata meta;
  meta.frame_length = static_cast<int>(r.U32());
  meta.sample_rate_hz = static_cast<int>(r.U32());
  meta.training_seed = r.U64();
  if (n < 1 || m < 2 || k < 1 || n > 4096 || m > (1 << 20) || k > (1 << 20)) {
    throw ParseError(8, "implausible codec dimensions");
  }
  const std::size_t need = static_cast<std::size_t>(2 * k + static_cast<std::size_t>(n) * m * k) * 4 + 8;
  if (r.remaining() != need) throw ParseError(r.pos(), "codec checkpoint size mismatch");
  Eigen::VectorXd mean(k), scale(k);
  for (int i = 0; i < k; ++i) mean[i] = r.F32();
  for (int i = 0; i < k; ++i) scale[i] = r.F32();
  std::vector<Codebook> stages;
  for (int s = 0; s < n; ++s) {
    Eigen::MatrixXd cw(k, m);
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < k; ++i) cw(i, j) = r.F32();
    }
    stages.emplace_back(std::move(cw));
  }
  const std::size_t checksum_pos = r.pos();
  if (r.U64() != expected) throw ParseError(checksum_pos, "codec checkpoint checksum mismatch");
  return Codec(std::move(stages), std::move(mean), std::move(scale), meta);
}

void Codec::Save(const std::string& path) const { WriteFileAtomic(path, Serialize()); }

Codec Codec::Load(const std::string& path) {
  const auto bytes = ReadFileBytes(path);
  return Deserialize(bytes);
}

std::uint64_t Codec::ContentHash() const { return Fnv1a64(Serialize()); }

bool Codec::operator==(const Codec& other) const {
  return meta_ == other.meta_ && mean_ == other.mean_ && scale_ == other.scale_ &&
         stages_ == other.stages_;
}

KmeansResult Kmeans(const Eigen::MatrixXd& data, int clusters, std::uint64_t seed,
                    const KmeansOptions& options) {
  const Eigen::Index points = data.cols();
  const Eigen::Index dim = data.rows();
  if (clusters < 1 || points < 1) throw ConfigError("k-means needs clusters >= 1 and data");
  if (options.pin_zero && clusters < 2) throw ConfigError("pinned origin needs clusters >= 2");
  Rng rng(seed);

  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(dim, clusters);
  Eigen::VectorXd nearest_d2(points);
  if (options.pin_zero) {
    nearest_d2 = data.colwise().squaredNorm().transpose();
  } else {
    centroids.col(0) = data.col(static_cast<Eigen::Index>(rng.Below(points)));
    nearest_d2 = (data.colwise() - centroids.col(0)).colwise().squaredNorm().transpose();
  }
  // k-means++ seeding for the remaining centroids.
  for (int c = 1; c < clusters; ++c) {
    const double total = nearest_d2.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      const double target = rng.Uniform() * total;
      double acc = 0.0;
      pick = points - 1;
      for (Eigen::Index p = 0; p < points; ++p) {
        acc += nearest_d2[p];
        if (acc > target && nearest_d2[p] > 0) {
          pick = p;
          break;
        }
      }
    } else {
      nearest_d2.maxCoeff(&pick);
    }
    centroids.col(c) = data.col(pick);
    const Eigen::VectorXd d2 =
        (data.colwise() - centroids.col(c)).colwise().squaredNorm().transpose();
    nearest_d2 = nearest_d2.cwiseMin(d2);
  }

  const Eigen::VectorXd point_norms = data.colwise().squaredNorm().transpose();
  std::vector<int> assign(static_cast<std::size_t>(points), 0);
  Eigen::VectorXd dist(points);
  KmeansResult result;
  double previous = std::numeric_limits<double>::infinity();
  constexpr Eigen::Index kChunk = 4096;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    // Assignment through the expanded form |x|^2 - 2 c.x + |c|^2.
    const Eigen::VectorXd centroid_norms = centroids.colwise().squaredNorm().transpose();
    double inertia = 0.0;
    for (Eigen::Index start = 0; start < points; start += kChunk) {
      const Eigen::Index count = std::min(kChunk, points - start);
      const Eigen::MatrixXd cross = centroids.transpose() * data.middleCols(start, count);
      for (Eigen::Index j = 0; j < count; ++j) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < clusters; ++c) {
          const double d = centroid_norms[c] - 2.0 * cross(c, j);
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
        const Eigen::Index p = start + j;
        assign[p] = best;
        dist[p] = std::max(0.0, best_d + point_norms[p]);
        inertia += dist[p];
      }
    }
    result.inertia = inertia;
    result.iterations = iter + 1;
    if (inertia == 0.0 ||
        (std::isfinite(previous) && previous - inertia <= options.tolerance * previous)) {
      break;
    }
    previous = inertia;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(dim, clusters);
    std::vector<Eigen::Index> counts(clusters, 0);
    for (Eigen::Index p = 0; p < points; ++p) {
      sums.col(assign[p]) += data.col(p);
      ++counts[assign[p]];
    }
    for (int c = options.pin_zero ? 1 : 0; c < clusters; ++c) {
      if (counts[c] > 0) {
        centroids.col(c) = sums.col(c) / static_cast<double>(counts[c]);
      } else {
        Eigen::Index far = 0;
        dist.maxCoeff(&far);
        centroids.col(c) = data.col(far);
        dist[far] = 0.0;
      }
    }
  }
  result.centroids = std::move(centroids);
  return result;
}

std::vector<Codebook> TrainCodebooks(const FeatureMatrix& features, int stages,
                                     int codebook_size, std::uint64_t seed,
                                     const KmeansOptions& options) {
  if (stages < 1) throw ConfigError("codec needs at least one stage");
  if (codebook_size < 2) throw ConfigError("codebook size must be at least 2");
  if (features.cols() < 10L * codebook_size) {
    throw ConfigError("need at least " + std::to_string(10L * codebook_size) +
                      " training frames, got " + std::to_string(features.cols()));
  }
  std::vector<Codebook> out;
  FeatureMatrix residual = features;
  for (int n = 0; n < stages; ++n) {
    auto km = Kmeans(residual, codebook_size, DeriveSeed(seed, static_cast<std::uint64_t>(n)), options);
    Codebook cb(RoundToFloat(km.centroids));
    residual -= QuantizeStage(cb, residual).quantized;
    out.push_back(std::move(cb));
  }
  return out;
}

Codec TrainCodec(std::span<const Waveform> clips, const CodecTrainConfig& cfg) {
  if (clips.empty()) throw ConfigError("codec training needs at least one clip");
  std::vector<Eigen::MatrixXd> per_clip;
  Eigen::Index total = 0;
  for (const auto& w : clips) {
    ValidateWaveform(w);
    if (w.sample_rate_hz != cfg.sample_rate_hz) {
      throw ConfigError("training clip rate does not match codec sample_rate");
    }
    per_clip.push_back(dsp::Mdct(w.samples, cfg.frame_length).coeffs);
    total += per_clip.back().cols();
  }
  const int k = cfg.frame_length / 2;
  Eigen::MatrixXd all(k, total);
  Eigen::Index at = 0;
  for (const auto& m : per_clip) {
    all.middleCols(at, m.cols()) = m;
    at += m.cols();
  }
  // Per-dimension mean with one pooled scale, so feature-space distances stay
  // proportional to waveform error under the orthonormal transform.
  Eigen::VectorXd mean = all.rowwise().mean();
  all.colwise() -= mean;
  double pooled = std::sqrt(all.squaredNorm() / static_cast<double>(all.size()));
  if (!(pooled > 0)) pooled = 1.0;
  pooled = static_cast<float>(pooled);
  mean = mean.cast<float>().cast<double>();
  Eigen::VectorXd scale = Eigen::VectorXd::Constant(k, pooled);
  // Recenter with the rounded mean so training sees what Encode produces.
  Eigen::MatrixXd features(k, total);
  at = 0;
  for (const auto& m : per_clip) {
    Eigen::MatrixXd f = m;
    f.colwise() -= mean;
    f.array().colwise() /= scale.array();
    features.middleCols(at, f.cols()) = f;
    at += f.cols();
  }
  auto books = TrainCodebooks(features, cfg.stages, cfg.codebook_size, cfg.seed, cfg.kmeans);
  CodecMetadata meta{cfg.frame_length, cfg.sample_rate_hz, cfg.seed};
  return Codec(std::move(books), std::move(mean), std::move(scale), meta);
}

}  // namespace udse::rvq

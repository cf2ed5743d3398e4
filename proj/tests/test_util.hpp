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

#include <unistd.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "audio_io.hpp"
#include "rng.hpp"
#include "rvq_codec.hpp"

namespace udse::test {

constexpr double kPi = 3.14159265358979323846;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "udse") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline Waveform Sine(double hz, double seconds, int rate, double amp = 0.5, double phase = 0.0) {
  Waveform w;
  w.sample_rate_hz = rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = amp * std::sin(2.0 * kPi * hz * static_cast<double>(i) / rate + phase);
  }
  return w;
}

inline Waveform WhiteNoise(std::size_t n, int rate, std::uint64_t seed, double amp = 0.3) {
  Rng rng(seed);
  Waveform w;
  w.sample_rate_hz = rate;
  w.samples.resize(n);
  for (auto& s : w.samples) s = amp * rng.Normal();
  return w;
}

inline double Energy(const std::vector<double>& x, std::size_t begin = 0,
                     std::size_t end = static_cast<std::size_t>(-1)) {
  end = std::min(end, x.size());
  double e = 0.0;
  for (std::size_t i = begin; i < end; ++i) e += x[i] * x[i];
  return e;
}

inline double Power(const std::vector<double>& x, std::size_t begin = 0,
                    std::size_t end = static_cast<std::size_t>(-1)) {
  end = std::min(end, x.size());
  return end > begin ? Energy(x, begin, end) / static_cast<double>(end - begin) : 0.0;
}

/// Least-squares power of the sinusoid at `hz` inside [begin, end).
inline double TonePower(const std::vector<double>& x, double hz, int rate, std::size_t begin,
                        std::size_t end) {
  end = std::min(end, x.size());
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(end - begin), 2);
  Eigen::VectorXd y(basis.rows());
  for (std::size_t i = begin; i < end; ++i) {
    const double t = 2.0 * kPi * hz * static_cast<double>(i) / rate;
    basis(static_cast<Eigen::Index>(i - begin), 0) = std::cos(t);
    basis(static_cast<Eigen::Index>(i - begin), 1) = std::sin(t);
    y(static_cast<Eigen::Index>(i - begin)) = x[i];
  }
  const Eigen::Vector2d c = basis.colPivHouseholderQr().solve(y);
  return 0.5 * c.squaredNorm();
}

inline std::vector<double> NaiveConvolve(const std::vector<double>& x,
                                         const std::vector<double>& h) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    for (std::size_t k = 0; k < h.size() && k <= n; ++k) y[n] += h[k] * x[n - k];
  }
  return y;
}

inline std::vector<std::complex<double>> NaiveDft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      acc += x[t] * std::polar(1.0, -2.0 * kPi * static_cast<double>(k * t) / n);
    }
    out[k] = acc;
  }
  return out;
}

/// Exhaustive nearest codeword, lowest index on ties, 1-based.
inline int BruteNearest(const Eigen::MatrixXd& codewords, const Eigen::VectorXd& x) {
  int best = 1;
  double best_d = (codewords.col(0) - x).squaredNorm();
  for (Eigen::Index m = 1; m < codewords.cols(); ++m) {
    const double d = (codewords.col(m) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(m) + 1;
    }
  }
  return best;
}

/// T60 from the Schroeder backward integral, fit between -5 and -25 dB.
inline double SchroederT60(const std::vector<double>& h, int rate) {
  std::vector<double> edc(h.size());
  double acc = 0.0;
  for (std::size_t i = h.size(); i-- > 0;) {
    acc += h[i] * h[i];
    edc[i] = acc;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double db = 10.0 * std::log10(edc[i] / edc[0]);
    if (db > -5.0 || db < -25.0) continue;
    const double t = static_cast<double>(i) / rate;
    sx += t;
    sy += db;
    sxx += t * t;
    sxy += t * db;
    ++n;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return -60.0 / slope;
}

/// Small codec with random codebooks (K = frame_length / 2) and identity
/// normalization; the zero codeword sits at token 1 of every stage.
inline rvq::Codec RandomCodec(int stages, int codebook_size, int frame_length, std::uint64_t seed,
                              int sample_rate_hz = 16000) {
  Rng rng(seed);
  const int dim = frame_length / 2;
  std::vector<rvq::Codebook> books;
  double scale = 1.0;
  for (int n = 0; n < stages; ++n) {
    Eigen::MatrixXd cw(dim, codebook_size);
    for (Eigen::Index j = 0; j < cw.size(); ++j) cw.data()[j] = scale * rng.Normal();
    cw.col(0).setZero();
    books.emplace_back(cw);
    scale *= 0.5;
  }
  rvq::CodecMetadata meta;
  meta.frame_length = frame_length;
  meta.sample_rate_hz = sample_rate_hz;
  meta.training_seed = seed;
  return rvq::Codec(std::move(books), Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim),
                    meta);
}

}  // namespace udse::test

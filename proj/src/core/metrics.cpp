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

#include "metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dsp.hpp"
#include "error.hpp"

namespace udse::eval {
namespace {

void RequireSameLength(const Waveform& est, const Waveform& ref) {
  if (est.size() != ref.size()) throw ConfigError("estimate and reference lengths differ");
  if (ref.size() == 0) throw DegenerateInput("empty reference");
}

double CappedRatioDb(double signal, double error) {
  if (error <= 0.0) return kSiSnrCapDb;
  if (signal <= 0.0) return -kSiSnrCapDb;
  return std::clamp(10.0 * std::log10(signal / error), -kSiSnrCapDb, kSiSnrCapDb);
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double SiSnr(const Waveform& est, const Waveform& ref) {
  RequireSameLength(est, ref);
  const double me = Mean(est.samples);
  const double mr = Mean(ref.samples);
  double dot = 0.0, rr = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double r = ref.samples[i] - mr;
    dot += (est.samples[i] - me) * r;
    rr += r * r;
  }
  if (rr <= 0.0) throw DegenerateInput("reference has zero energy");
  const double alpha = dot / rr;
  double target = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double s = alpha * (ref.samples[i] - mr);
    const double e = (est.samples[i] - me) - s;
    target += s * s;
    noise += e * e;
  }
  return CappedRatioDb(target, noise);
}

double Snr(const Waveform& est, const Waveform& ref) {
  RequireSameLength(est, ref);
  double signal = 0.0, error = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    signal += ref.samples[i] * ref.samples[i];
    const double d = est.samples[i] - ref.samples[i];
    error += d * d;
  }
  return CappedRatioDb(signal, error);
}

double LogSpectralDistance(const Waveform& est, const Waveform& ref, const SpectralConfig& cfg) {
  RequireSameLength(est, ref);
  const auto window = cfg.rectangular ? dsp::RectangularWindow(cfg.frame_length)
                                     : dsp::HannWindow(cfg.frame_length);
  const auto a = dsp::Stft(est.samples, cfg.frame_length, cfg.hop, window);
  const auto b = dsp::Stft(ref.samples, cfg.frame_length, cfg.hop, window);
  constexpr double kFloor = 1e-8;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < a.bins.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.bins.rows(); ++i) {
      const double d = 20.0 * (std::log10(std::max(std::abs(a.bins(i, j)), kFloor)) -
                               std::log10(std::max(std::abs(b.bins(i, j)), kFloor)));
      sum += d * d;
    }
  }
  return std::sqrt(sum / static_cast<double>(a.bins.size()));
}

std::vector<double> TokenAccuracy(const rvq::TokenGrid& pred, const rvq::TokenGrid& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw ConfigError("token grids differ in shape");
  }
  std::vector<double> acc(static_cast<std::size_t>(gt.rows()), 0.0);
  if (gt.cols() == 0) return acc;
  for (Eigen::Index n = 0; n < gt.rows(); ++n) {
    long hits = 0;
    for (Eigen::Index l = 0; l < gt.cols(); ++l) hits += pred(n, l) == gt(n, l);
    acc[static_cast<std::size_t>(n)] = static_cast<double>(hits) / static_cast<double>(gt.cols());
  }
  return acc;
}

}  // namespace udse::eval

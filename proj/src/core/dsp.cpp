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

#include "dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "error.hpp"

namespace udse::dsp {
namespace {

constexpr double kPi = 3.14159265358979323846;

struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

// FFTW's planner is not thread-safe; execution with the new-array API is.
std::mutex& PlannerMutex() {
  static std::mutex m;
  return m;
}

const FftPlans& PlansFor(std::size_t n) {
  static std::map<std::size_t, FftPlans> cache;
  std::lock_guard<std::mutex> lock(PlannerMutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> in(n);
  std::vector<std::complex<double>> out(n / 2 + 1);
  const int len = static_cast<int>(n);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  FftPlans plans;
  plans.forward = fftw_plan_dft_r2c_1d(
      len, in.data(), reinterpret_cast<fftw_complex*>(out.data()), flags);
  plans.inverse = fftw_plan_dft_c2r_1d(
      len, reinterpret_cast<fftw_complex*>(out.data()), in.data(), flags);
  return cache.emplace(n, plans).first->second;
}

// Orthonormal MDCT analysis matrix (F x 2F) with the sine window folded in.
const Eigen::MatrixXd& MdctBasis(int frame_length) {
  static std::map<int, std::unique_ptr<Eigen::MatrixXd>> cache;
  static std::mutex m;
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(frame_length);
  if (it != cache.end()) return *it->second;
  const int f = frame_length / 2;
  const auto window = SineWindow(frame_length);
  auto basis = std::make_unique<Eigen::MatrixXd>(f, frame_length);
  const double scale = std::sqrt(2.0 / f);
  for (int k = 0; k < f; ++k) {
    for (int n = 0; n < frame_length; ++n) {
      (*basis)(k, n) = scale * window[n] *
                       std::cos(kPi / f * (n + 0.5 + f / 2.0) * (k + 0.5));
    }
  }
  return *cache.emplace(frame_length, std::move(basis)).first->second;
}

}  // namespace

std::vector<std::complex<double>> Rfft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  if (n == 0) return out;
  const auto& plans = PlansFor(n);
  std::vector<double> in(x.begin(), x.end());
  fftw_execute_dft_r2c(plans.forward, in.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

std::vector<double> Irfft(std::span<const std::complex<double>> bins, std::size_t n) {
  std::vector<double> out(n);
  if (n == 0) return out;
  if (bins.size() != n / 2 + 1) throw ConfigError("Irfft: bin count does not match length");
  const auto& plans = PlansFor(n);
  std::vector<std::complex<double>> in(bins.begin(), bins.end());
  fftw_execute_dft_c2r(plans.inverse, reinterpret_cast<fftw_complex*>(in.data()),
                       out.data());
  return out;
}

std::vector<double> SineWindow(int length) {
  std::vector<double> w(length);
  for (int n = 0; n < length; ++n) w[n] = std::sin(kPi * (n + 0.5) / length);
  return w;
}

std::vector<double> HannWindow(int length) {
  std::vector<double> w(length);
  for (int n = 0; n < length; ++n) w[n] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / length);
  return w;
}

std::vector<double> RectangularWindow(int length) {
  return std::vector<double>(length, 1.0);
}

std::size_t MdctFrameCount(std::size_t length, int frame_length) {
  const std::size_t hop = frame_length / 2;
  return (length + hop - 1) / hop + 1;
}

MdctFrames Mdct(std::span<const double> x, int frame_length) {
  if (frame_length < 4 || frame_length % 2 != 0) {
    throw ConfigError("MDCT frame length must be even and at least 4");
  }
  const int f = frame_length / 2;
  const std::size_t frames = MdctFrameCount(x.size(), frame_length);
  // Padded layout: F zeros, the signal, zeros up to (L + 1) * F samples.
  Eigen::MatrixXd stacked = Eigen::MatrixXd::Zero(frame_length, frames);
  for (std::size_t l = 0; l < frames; ++l) {
    for (int n = 0; n < frame_length; ++n) {
      const long t = static_cast<long>(l) * f + n - f;
      if (t >= 0 && t < static_cast<long>(x.size())) stacked(n, l) = x[t];
    }
  }
  MdctFrames out;
  out.frame_length = frame_length;
  out.length = x.size();
  out.coeffs = MdctBasis(frame_length) * stacked;
  return out;
}

std::vector<double> Imdct(const MdctFrames& frames) {
  const int f = frames.hop();
  const Eigen::MatrixXd& basis = MdctBasis(frames.frame_length);
  if (frames.coeffs.rows() != f) throw ConfigError("IMDCT: coefficient rows != F");
  const Eigen::MatrixXd blocks = basis.transpose() * frames.coeffs;
  std::vector<double> out(frames.length, 0.0);
  // Fixed overlap-add order: frame by frame, ascending.
  for (Eigen::Index l = 0; l < blocks.cols(); ++l) {
    for (int n = 0; n < frames.frame_length; ++n) {
      const long t = static_cast<long>(l) * f + n - f;
      if (t >= 0 && t < static_cast<long>(out.size())) out[t] += blocks(n, l);
    }
  }
  return out;
}

void CheckOverlapAdd(std::span<const double> window, int hop) {
  const int n = static_cast<int>(window.size());
  if (hop <= 0 || hop > n) throw ConfigError("STFT hop must be in [1, frame_length]");
  double lo = INFINITY, hi = 0.0;
  for (int phase = 0; phase < hop; ++phase) {
    double acc = 0.0;
    for (int t = phase; t < n; t += hop) acc += window[t] * window[t];
    lo = std::min(lo, acc);
    hi = std::max(hi, acc);
  }
  if (!(hi > 0.0) || lo <= 1e-10 * hi) {
    throw ConfigError("window does not satisfy overlap-add at this hop");
  }
}

StftFrames Stft(std::span<const double> x, int frame_length, int hop,
                std::span<const double> window) {
  if (frame_length < 1) throw ConfigError("STFT frame length must be positive");
  if (hop < 1 || hop > frame_length) throw ConfigError("STFT hop must be in [1, frame_length]");
  if (static_cast<int>(window.size()) != frame_length) {
    throw ConfigError("STFT window length must equal frame length");
  }
  StftFrames out;
  out.frame_length = frame_length;
  out.hop = hop;
  out.window.assign(window.begin(), window.end());
  out.length = x.size();
  out.pad_front = static_cast<std::size_t>(frame_length - hop);
  const std::size_t span = out.pad_front + x.size();
  const std::size_t frames = span == 0 ? 1 : (span - 1) / hop + 1;
  out.bins.resize(frame_length / 2 + 1, static_cast<Eigen::Index>(frames));
  std::vector<double> buf(frame_length);
  for (std::size_t l = 0; l < frames; ++l) {
    for (int n = 0; n < frame_length; ++n) {
      const long t = static_cast<long>(l * hop + n) - static_cast<long>(out.pad_front);
      buf[n] = (t >= 0 && t < static_cast<long>(x.size())) ? x[t] * window[n] : 0.0;
    }
    const auto spec = Rfft(buf);
    for (std::size_t k = 0; k < spec.size(); ++k) out.bins(k, l) = spec[k];
  }
  return out;
}

std::vector<double> Istft(const StftFrames& frames) {
  CheckOverlapAdd(frames.window, frames.hop);
  const int n = frames.frame_length;
  const std::size_t total = (frames.bins.cols() - 1) * frames.hop + n;
  std::vector<double> acc(total, 0.0), norm(total, 0.0);
  std::vector<std::complex<double>> spec(frames.bins.rows());
  for (Eigen::Index l = 0; l < frames.bins.cols(); ++l) {
    for (Eigen::Index k = 0; k < frames.bins.rows(); ++k) spec[k] = frames.bins(k, l);
    const auto block = Irfft(spec, n);
    const std::size_t start = l * frames.hop;
    for (int t = 0; t < n; ++t) {
      acc[start + t] += frames.window[t] * block[t] / n;
      norm[start + t] += frames.window[t] * frames.window[t];
    }
  }
  std::vector<double> out(frames.length, 0.0);
  for (std::size_t t = 0; t < frames.length; ++t) {
    const std::size_t p = t + frames.pad_front;
    if (p < total && norm[p] > 1e-12) out[t] = acc[p] / norm[p];
  }
  return out;
}

std::vector<double> FftConvolve(std::span<const double> x, std::span<const double> h) {
  if (x.empty() || h.empty()) throw ConfigError("convolution operands must be non-empty");
  const std::size_t full = x.size() + h.size() - 1;
  std::size_t n = 1;
  while (n < full) n <<= 1;
  std::vector<double> a(n, 0.0), b(n, 0.0);
  std::copy(x.begin(), x.end(), a.begin());
  std::copy(h.begin(), h.end(), b.begin());
  auto fa = Rfft(a);
  const auto fb = Rfft(b);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  auto y = Irfft(fa, n);
  std::vector<double> out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) out[t] = y[t] / static_cast<double>(n);
  return out;
}

}  // namespace udse::dsp

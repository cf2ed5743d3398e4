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

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace udse::dsp {

/// Real-input FFT of length n (any n >= 1), one-sided output of n/2+1 bins.
std::vector<std::complex<double>> Rfft(std::span<const double> x);
/// Inverse of Rfft; `n` is the time-domain length. Unnormalized: returns
/// n * x for x = Irfft(Rfft(x)) / n, matching the FFTW convention.
std::vector<double> Irfft(std::span<const std::complex<double>> bins, std::size_t n);

std::vector<double> SineWindow(int length);
/// Periodic Hann window (COLA at hop = length / 4 and length / 2).
std::vector<double> HannWindow(int length);
std::vector<double> RectangularWindow(int length);

/// MDCT frame set: F coefficients per frame, hop F, frame length 2F.
struct MdctFrames {
  Eigen::MatrixXd coeffs;  // F x L
  int frame_length = 0;
  std::size_t length = 0;  // original sample count

  int hop() const { return frame_length / 2; }
};

/// Sine-windowed orthonormal MDCT. The input is padded with one half frame
/// on each side and to a whole number of hops, giving L = ceil(T/F) + 1.
MdctFrames Mdct(std::span<const double> x, int frame_length);
/// Overlap-add synthesis; trims the analysis padding back to `length`.
std::vector<double> Imdct(const MdctFrames& frames);
std::size_t MdctFrameCount(std::size_t length, int frame_length);

struct StftFrames {
  Eigen::MatrixXcd bins;  // (frame_length/2 + 1) x L
  int frame_length = 0;
  int hop = 0;
  std::vector<double> window;
  std::size_t length = 0;
  std::size_t pad_front = 0;
};

/// One-sided STFT. The signal is front-padded by frame_length - hop so every
/// original sample sees the full steady-state window overlap.
StftFrames Stft(std::span<const double> x, int frame_length, int hop,
                std::span<const double> window);
/// Least-squares overlap-add inverse with window-squared normalization.
std::vector<double> Istft(const StftFrames& frames);
/// Throws ConfigError if the squared window does not overlap-add to a
/// strictly positive envelope at this hop.
void CheckOverlapAdd(std::span<const double> window, int hop);

/// Linear convolution truncated to x.size() samples.
std::vector<double> FftConvolve(std::span<const double> x, std::span<const double> h);

}  // namespace udse::dsp

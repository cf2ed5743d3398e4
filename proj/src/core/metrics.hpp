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

#include <vector>

#include "audio_io.hpp"
#include "rvq_codec.hpp"

namespace udse::eval {

constexpr double kSiSnrCapDb = 60.0;

/// Scale-invariant SNR of `est` against `ref` after removing both means,
/// capped at +60 dB.
double SiSnr(const Waveform& est, const Waveform& ref);

struct SpectralConfig {
  int frame_length = 512;
  int hop = 128;
  bool rectangular = false;  // Hann otherwise
};

/// RMS over all STFT bins of 20 log10(|S_est| / |S_ref|), magnitudes floored
/// at 1e-8.
double LogSpectralDistance(const Waveform& est, const Waveform& ref,
                           const SpectralConfig& cfg = {});

/// Fraction of matching frames for every stage.
std::vector<double> TokenAccuracy(const rvq::TokenGrid& pred, const rvq::TokenGrid& gt);

/// Reconstruction SNR 10 log10(|ref|^2 / |est - ref|^2), capped at +60 dB.
double Snr(const Waveform& est, const Waveform& ref);

}  // namespace udse::eval

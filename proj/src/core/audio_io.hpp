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

#include <cstddef>
#include <string>
#include <vector>

namespace udse {

/// Mono audio. Samples nominally lie in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 0;

  std::size_t size() const { return samples.size(); }
  bool operator==(const Waveform&) const = default;
};

/// Throws if the waveform violates its invariants (finite, rate > 0, non-empty).
void ValidateWaveform(const Waveform& w);

enum class SampleFormat { kPcm16, kFloat32 };

struct WavWriteStats {
  /// Samples outside [-1, 1] that were saturated before encoding.
  std::size_t saturated = 0;
};

/// Reads a RIFF/WAVE file (PCM-16 or IEEE float-32, mono or stereo).
/// Stereo input is averaged to mono. PCM-16 values are divided by 32768.
Waveform ReadWav(const std::string& path);
Waveform ParseWav(const std::vector<std::uint8_t>& bytes);

WavWriteStats WriteWav(const Waveform& w, const std::string& path,
                       SampleFormat format = SampleFormat::kFloat32);
std::vector<std::uint8_t> EncodeWav(const Waveform& w, SampleFormat format,
                                    WavWriteStats* stats = nullptr);

/// Kaiser-windowed sinc resampler (64 taps per phase at the lower rate,
/// beta 8.6). Output length is round(T * target / source).
Waveform Resample(const Waveform& w, int target_hz);

}  // namespace udse

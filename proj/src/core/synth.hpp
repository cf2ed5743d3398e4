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
#include <string>
#include <vector>

#include "audio_io.hpp"

namespace udse::synth {

// Speech-like test material. Every syllable is a stationary harmonic tone
// whose fundamental is a multiple of sample_rate / hop, and syllables start
// on hop boundaries, so a syllable looks the same in every MDCT frame it
// fills. This keeps the toy corpus within reach of a small RVQ codec while
// still exercising onsets, offsets, several pitches and vowel envelopes.
struct SpeechConfig {
  int sample_rate_hz = 16000;
  int hop = 320;
  double seconds = 1.0;
  std::vector<int> pitch_multiples = {2, 3, 4, 5};  // f0 = multiple * rate / hop
  std::vector<double> levels = {0.30, 0.55};        // syllable RMS
  int vowel_count = 5;
  int min_syllable_hops = 4;
  int max_syllable_hops = 10;
  int min_gap_hops = 1;
  int max_gap_hops = 3;
};

Waveform SpeechLike(const SpeechConfig& cfg, std::uint64_t seed);

enum class NoiseFamily { kWhite, kPink, kBrown, kBabble, kModulated };

NoiseFamily ParseNoiseFamily(const std::string& name);
const char* NoiseFamilyName(NoiseFamily family);

/// Unit-RMS colored noise.
Waveform Noise(NoiseFamily family, std::size_t length, int sample_rate_hz,
               std::uint64_t seed);

/// Exponentially decaying noise tail behind a unit direct path; the energy
/// envelope falls 60 dB over `t60_seconds`.
Waveform ExponentialRir(double t60_seconds, int sample_rate_hz, std::uint64_t seed);

}  // namespace udse::synth

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
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "audio_io.hpp"
#include "rvq_codec.hpp"

namespace udse::distort {

/// `source` is a built-in noise family name (white, pink, brown, babble,
/// modulated) or a path to a WAV file.
struct NoiseSpec {
  std::string source = "white";
  double snr_db = 0.0;
};

/// `source` is "synthetic" (exponential-decay RIR with the given T60) or a
/// path to a WAV impulse response.
struct ReverbSpec {
  std::string source = "synthetic";
  double t60_seconds = 0.5;
};

struct BandLimitSpec {
  int target_hz = 2000;
};

struct ClipSpec {
  double threshold_fraction = 0.5;
};

enum class PhaseWindow { kRectangular, kHann };

/// The default framing (rectangular, hop = frame) is non-overlapping, so any
/// phase assignment is a consistent STFT and re-analysis returns the input
/// magnitudes. Hann framing smears the random phases across frames.
struct PhaseSpec {
  int frame_length = 512;
  int hop = 512;
  std::uint64_t seed = 0;
  PhaseWindow window = PhaseWindow::kRectangular;
};

struct CompressSpec {
  std::string codec_path;
  int num_stages = 1;
};

using Distortion =
    std::variant<NoiseSpec, ReverbSpec, BandLimitSpec, ClipSpec, PhaseSpec, CompressSpec>;

/// Ordered chain of distortions; empty means identity.
using DistortionSpec = std::vector<Distortion>;

/// Single-line text form, e.g. "reverb(source=synthetic,t60=0.4);noise(source=pink,snr=5)".
/// The empty chain serializes as "identity".
std::string SerializeSpec(const DistortionSpec& spec);
DistortionSpec ParseSpec(const std::string& text);

/// Loads codec checkpoints once per path; safe to share between threads.
class CodecCache {
 public:
  std::shared_ptr<const rvq::Codec> Get(const std::string& path);

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const rvq::Codec>> codecs_;
};

/// x + g * crop(n) with g chosen so the achieved SNR equals snr_db. The crop
/// offset is drawn from `seed`; an all-zero crop is retried up to 8 times.
Waveform AddNoise(const Waveform& x, const Waveform& noise, double snr_db, std::uint64_t seed);
/// Returns the gain applied to the noise crop as well.
Waveform AddNoise(const Waveform& x, const Waveform& noise, double snr_db, std::uint64_t seed,
                  double* gain, std::size_t* offset);

/// Convolution truncated to len(x), rescaled so its peak equals the input peak.
Waveform Reverberate(const Waveform& x, const Waveform& rir);

/// Down to target_hz and back to the original rate.
Waveform BandLimit(const Waveform& x, int target_hz);

/// Hard clip at threshold_fraction * max|x|.
Waveform Clip(const Waveform& x, double threshold_fraction);
/// Hard clip at an absolute level; ClipAtLevel(ClipAtLevel(x, t), t) equals
/// ClipAtLevel(x, t).
Waveform ClipAtLevel(const Waveform& x, double level);

/// Keeps STFT magnitudes and replaces phases with seeded uniform phases.
Waveform PhaseDistort(const Waveform& x, const PhaseSpec& spec);

/// Encode and decode through the first `num_stages` codec stages.
Waveform CompressDistort(const Waveform& x, const rvq::Codec& codec, int num_stages = 1);

/// Applies the chain in order. Stage i draws its randomness from
/// DeriveSeed(seed, i).
Waveform ApplySpec(const Waveform& x, const DistortionSpec& spec, std::uint64_t seed,
                   CodecCache* codecs = nullptr);
Waveform ApplyOne(const Waveform& x, const Distortion& d, std::uint64_t seed,
                  CodecCache* codecs = nullptr);

}  // namespace udse::distort

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

#include "distortion.hpp"
#include "synth.hpp"

namespace udse::corpus {

enum class Split { kTrain, kTest };

Split ParseSplit(const std::string& name);
const char* SplitName(Split split);

/// SNR grid for the denoising task: {0, 5, 10, 15} dB for training and
/// {2.5, 7.5, 12.5, 17.5} dB for testing.
const std::vector<double>& SnrGrid(Split split);

/// Recipe ids: DN, DR, BWE, DC, PDR, CDR, DN+BWE, DN+DR+BWE, DN+DR+DC,
/// DN+PDR+CDR.
const std::vector<std::string>& KnownRecipes();

struct RecipeOptions {
  /// Noise families or WAV files/directories to draw from.
  std::vector<std::string> noise_sources = {"white", "pink", "brown", "babble", "modulated"};
  /// "synthetic" or a directory of RIR WAV files.
  std::string rir_source = "synthetic";
  double t60_min = 0.2;
  double t60_max = 1.0;
  int bwe_hz = 2000;
  int mixed_bwe_hz = 8000;
  double clip_min = 0.1;
  double clip_max = 0.9;
  distort::PhaseSpec phase;
  /// Codec checkpoint used by CDR recipes.
  std::string codec_path;
};

/// Draws a concrete distortion chain for one utterance.
distort::DistortionSpec InstantiateRecipe(const std::string& recipe, Split split,
                                          const RecipeOptions& options, std::uint64_t seed);

struct ManifestEntry {
  std::string clean_path;
  std::string degraded_path;
  std::string recipe;
  std::string spec;  // serialized chain
  std::uint64_t seed = 0;
  std::string status = "ok";  // "ok" or "failed: <reason>"

  bool ok() const { return status == "ok"; }
  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  int format_version = 1;
  std::uint64_t global_seed = 0;
  Split split = Split::kTrain;
  std::vector<ManifestEntry> entries;

  bool operator==(const Manifest&) const = default;
};

std::string FormatManifest(const Manifest& manifest);
Manifest ParseManifest(const std::string& text);
void WriteManifest(const Manifest& manifest, const std::string& path);
Manifest ReadManifest(const std::string& path);

/// Sorted list of *.wav files in a directory.
std::vector<std::string> ListWavFiles(const std::string& dir);

/// Writes `count` speech-like clips to dir/clean_NNNN.wav and returns the paths.
std::vector<std::string> WriteSyntheticClean(const std::string& dir, int count,
                                             const synth::SpeechConfig& cfg, std::uint64_t seed);

struct BuildOptions {
  std::vector<std::string> recipes = {"DN"};
  Split split = Split::kTrain;
  std::uint64_t seed = 1;
  RecipeOptions recipe;
  int threads = 1;
};

/// One entry per (clean file, recipe). Entry i uses seed DeriveSeed(seed, i),
/// so serial and parallel runs write identical files. Per-entry failures are
/// recorded in the manifest and do not stop generation.
Manifest BuildCorpus(const std::vector<std::string>& clean_paths, const std::string& out_dir,
                     const BuildOptions& options);
Manifest BuildCorpus(const std::string& clean_dir, const std::string& out_dir,
                     const BuildOptions& options);

/// Recomputes a degraded waveform from its manifest entry.
Waveform Regenerate(const ManifestEntry& entry, distort::CodecCache* codecs = nullptr);

/// Paths of entries whose files no longer match regeneration byte for byte.
std::vector<std::string> VerifyCorpus(const Manifest& manifest);

}  // namespace udse::corpus

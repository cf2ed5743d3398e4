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

#include "corpus.hpp"
#include "metrics.hpp"
#include "udse_model.hpp"

namespace udse::eval {

struct UtteranceRecord {
  std::string id;
  std::string status = "ok";
  double si_snr_db = 0.0;
  double degraded_si_snr_db = 0.0;
  double lsd_db = 0.0;
  std::vector<double> token_accuracy;
  int stages_used = 0;
};

struct Aggregate {
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;
};

Aggregate Summarize(std::vector<double> values);

struct EvalReport {
  std::vector<UtteranceRecord> records;  // sorted by id
  int stages = 0;
  Aggregate si_snr_db, degraded_si_snr_db, lsd_db;
  std::vector<Aggregate> token_accuracy;
  std::vector<std::string> warnings;

  /// Recomputes the aggregates from the successful records.
  void Recompute();
  std::string Format() const;
};

struct EvalOptions {
  std::uint64_t seed = 1;
  SpectralConfig lsd;
  /// Replace predictions with the clean tokens (codec ceiling).
  bool oracle_tokens = false;
  /// When set, writes |STFT| of clean, degraded and enhanced audio as raw
  /// float32 matrices with a 16-byte (rows, cols as u64) header.
  std::string spectrogram_dir;
  int threads = 1;
};

/// Enhances every ok entry of the manifest and scores it against its clean
/// reference. Failures are recorded and evaluation continues.
EvalReport EvaluateCorpus(const corpus::Manifest& manifest, const model::UdseModel& model,
                          const rvq::Codec& codec, const EvalOptions& options);

/// Raw float32 |STFT| dump (bins x frames, column-major).
void WriteSpectrogram(const Waveform& w, const SpectralConfig& cfg, const std::string& path);

}  // namespace udse::eval

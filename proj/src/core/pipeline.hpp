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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "eval_report.hpp"

namespace udse::pipeline {

struct CommandOptions {
  std::string config_path;  // empty: profile defaults
  std::optional<config::Profile> profile;
  std::optional<std::uint64_t> seed;  // replaces every seed in the config
  int threads = 0;                    // 0 keeps data.threads
  std::string input;                  // enhance
  std::string output;                 // enhance
  std::string variant;                // ablate: parallel, first-only or all
  std::function<void(const std::string&)> log;
};

const std::vector<std::string>& Commands();

/// Resolves the config for a command: file (or defaults), profile, then the
/// command-line overrides.
config::RunConfig ResolveConfig(const CommandOptions& options);

/// Runs one command. Every command holds an exclusive lock on the work
/// directory, writes its artifacts atomically and finishes with a run log in
/// <work_dir>/logs/<command>.log that ends with "DONE". On failure the
/// artifacts written so far are removed and the error is rethrown.
void Run(const std::string& command, const CommandOptions& options);

struct AblationRow {
  std::string variant;
  std::vector<double> token_accuracy;
  double mean_accuracy = 0.0;
  double si_snr_db = 0.0;
};

/// Paired comparison table; the first row is the sequential baseline.
std::string FormatAblation(const std::vector<AblationRow>& rows);

}  // namespace udse::pipeline

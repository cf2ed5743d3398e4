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

#include "nn/graph.hpp"

namespace udse::nn {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.01;
  long warmup_steps = 100;
  long total_steps = 2000;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
};

/// Linear warmup to lr, then cosine decay to zero at total_steps.
/// `step` counts completed updates starting from 1.
double ScheduledLearningRate(const AdamWConfig& cfg, long step);

/// AdamW with decoupled weight decay; decay applies to parameters flagged
/// `decay` only.
class AdamW {
 public:
  AdamW(const AdamWConfig& cfg, const ParameterSet& params);

  /// Applies one update from the gradients currently stored in `params`.
  /// Returns the learning rate that was used.
  double Step(ParameterSet& params);

  long step() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  AdamWConfig cfg_;
  long step_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace udse::nn

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

#include "nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "error.hpp"

namespace udse::nn {

double ScheduledLearningRate(const AdamWConfig& cfg, long step) {
  if (step < 1) step = 1;
  if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps) {
    return cfg.lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  const long span = cfg.total_steps - cfg.warmup_steps;
  if (span <= 0) return cfg.lr;
  const double progress =
      std::min(1.0, static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(span));
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(const AdamWConfig& cfg, const ParameterSet& params) : cfg_(cfg) {
  if (!(cfg.lr > 0.0) || cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 ||
      cfg.beta2 >= 1.0 || !(cfg.eps > 0.0) || cfg.weight_decay < 0.0 || cfg.clip_norm < 0.0) {
    throw ConfigError("invalid optimizer hyperparameters");
  }
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (int i = 0; i < params.size(); ++i) {
    m_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
    v_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
  }
}

double AdamW::Step(ParameterSet& params) {
  if (params.size() != static_cast<int>(m_.size())) {
    throw ConfigError("parameter set changed after optimizer construction");
  }
  ++step_;
  const double lr = ScheduledLearningRate(cfg_, step_);
  double clip = 1.0;
  if (cfg_.clip_norm > 0.0) {
    double sq = 0.0;
    for (int i = 0; i < params.size(); ++i) {
      if (params[i].grad.size() != 0) sq += params[i].grad.squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg_.clip_norm) clip = cfg_.clip_norm / norm;
  }
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (int i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (p.grad.size() == 0) continue;
    const Matrix g = p.grad * clip;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseAbs2();
    if (p.decay && cfg_.weight_decay > 0.0) p.value *= 1.0 - lr * cfg_.weight_decay;
    p.value.array() -=
        lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
  }
  return lr;
}

}  // namespace udse::nn

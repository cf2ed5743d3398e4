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

#include "nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace udse::nn {

Matrix SoftmaxColumns(const Matrix& logits) {
  Matrix p = logits.rowwise() - logits.colwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().rowwise() /= p.colwise().sum().array();
  return p;
}

double CrossEntropy(const Matrix& probs, std::span<const int> targets) {
  if (static_cast<Eigen::Index>(targets.size()) != probs.cols()) {
    throw ConfigError("cross-entropy needs one target per column");
  }
  if (targets.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t l = 0; l < targets.size(); ++l) {
    const int t = targets[l];
    if (t < 1 || t > probs.rows()) throw RangeError("cross-entropy target out of range");
    sum -= std::log(std::max(probs(t - 1, static_cast<Eigen::Index>(l)), 1e-12));
  }
  return sum / static_cast<double>(targets.size());
}

int ArgmaxColumn(const Matrix& m, Eigen::Index column) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < m.rows(); ++i) {
    if (m(i, column) > m(best, column)) best = i;
  }
  return static_cast<int>(best) + 1;
}

}  // namespace udse::nn

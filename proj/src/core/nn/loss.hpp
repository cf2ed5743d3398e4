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

#include <span>

#include "nn/graph.hpp"

namespace udse::nn {

/// Max-subtracted softmax over each column.
Matrix SoftmaxColumns(const Matrix& logits);

/// Mean over columns of -log probs[target, column] with the log argument
/// clamped at 1e-12. Targets are 1-based.
double CrossEntropy(const Matrix& probs, std::span<const int> targets);

/// Lowest row index (1-based) of the column maximum.
int ArgmaxColumn(const Matrix& m, Eigen::Index column);

}  // namespace udse::nn

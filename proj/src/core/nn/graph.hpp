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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace udse::nn {

using Matrix = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool decay = true;  // subject to decoupled weight decay
};

/// Owns trainable matrices and their gradient buffers. Indices are stable.
class ParameterSet {
 public:
  int Add(std::string name, Matrix init, bool decay);

  Parameter& operator[](int index) { return params_[index]; }
  const Parameter& operator[](int index) const { return params_[index]; }
  int size() const { return static_cast<int>(params_.size()); }
  /// -1 if absent.
  int Find(const std::string& name) const;

  void ZeroGrad();
  long ScalarCount() const;
  /// Rounds every value to the nearest float32.
  void RoundToFloat();

  bool operator==(const ParameterSet& other) const;

 private:
  std::vector<Parameter> params_;
};

/// Reverse-mode tape over matrix-valued nodes. Build the forward pass with
/// the op methods, then call Backward on a 1x1 node; gradients of parameter
/// leaves are accumulated into the bound ParameterSet.
class Graph {
 public:
  using Node = int;

  explicit Graph(ParameterSet* params = nullptr) : params_(params) {}

  Node Constant(Matrix value);
  Node Param(int index);

  /// op(a) * op(b), where op transposes when the flag is set.
  Node MatMul(Node a, Node b, bool transpose_a = false, bool transpose_b = false);
  Node Add(Node a, Node b);
  /// Adds a column vector to every column.
  Node AddBias(Node x, Node bias);
  Node Scale(Node x, double s);
  Node Silu(Node x);
  /// Normalizes each column over its rows, then applies gain and bias.
  Node LayerNorm(Node x, Node gain, Node bias, double eps = 1e-5);
  Node SoftmaxColumns(Node x);
  Node Rows(Node x, int begin, int count);
  Node ConcatRows(std::span<const Node> parts);
  /// Per-channel 1-D convolution along columns with zero "same" padding.
  /// kernel is C x k (k odd), bias is C x 1.
  Node DepthwiseConv(Node x, Node kernel, Node bias);
  /// weight * sum over columns of -log softmax(logits)[target]; targets are
  /// 1-based rows. The log argument is clamped at 1e-12. Returns 1x1.
  Node SoftmaxCrossEntropy(Node logits, std::span<const int> targets, double weight);

  const Matrix& value(Node n) const { return nodes_[n].value; }
  const Matrix& grad(Node n) const { return nodes_[n].grad; }
  std::size_t size() const { return nodes_.size(); }

  void Backward(Node root);

 private:
  struct Record {
    Matrix value;
    Matrix grad;
    std::function<void()> backward;
    int param = -1;
    bool needs_grad = false;
  };

  Node Push(Matrix value, bool needs_grad);
  Matrix& GradOf(Node n);
  bool Needs(Node n) const { return nodes_[n].needs_grad; }

  ParameterSet* params_;
  std::vector<Record> nodes_;
};

}  // namespace udse::nn

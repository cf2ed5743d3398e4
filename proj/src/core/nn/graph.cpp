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

#include "nn/graph.hpp"

#include <cmath>

#include "error.hpp"

namespace udse::nn {

int ParameterSet::Add(std::string name, Matrix init, bool decay) {
  if (Find(name) >= 0) throw ConfigError("duplicate parameter name '" + name + "'");
  Parameter p;
  p.name = std::move(name);
  p.grad = Matrix::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  p.decay = decay;
  params_.push_back(std::move(p));
  return size() - 1;
}

int ParameterSet::Find(const std::string& name) const {
  for (int i = 0; i < size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return -1;
}

void ParameterSet::ZeroGrad() {
  for (auto& p : params_) p.grad.setZero();
}

long ParameterSet::ScalarCount() const {
  long n = 0;
  for (const auto& p : params_) n += static_cast<long>(p.value.size());
  return n;
}

void ParameterSet::RoundToFloat() {
  for (auto& p : params_) p.value = p.value.cast<float>().cast<double>();
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (size() != other.size()) return false;
  for (int i = 0; i < size(); ++i) {
    const auto& a = params_[i];
    const auto& b = other.params_[i];
    if (a.name != b.name || a.decay != b.decay || a.value.rows() != b.value.rows() ||
        a.value.cols() != b.value.cols() || a.value != b.value) {
      return false;
    }
  }
  return true;
}

Graph::Node Graph::Push(Matrix value, bool needs_grad) {
  Record r;
  r.value = std::move(value);
  r.needs_grad = needs_grad;
  nodes_.push_back(std::move(r));
  return static_cast<Node>(nodes_.size() - 1);
}

Matrix& Graph::GradOf(Node n) {
  Record& r = nodes_[n];
  if (r.grad.size() == 0) r.grad = Matrix::Zero(r.value.rows(), r.value.cols());
  return r.grad;
}

Graph::Node Graph::Constant(Matrix value) { return Push(std::move(value), false); }

Graph::Node Graph::Param(int index) {
  if (!params_) throw ConfigError("graph has no parameter set bound");
  const Node n = Push((*params_)[index].value, true);
  nodes_[n].param = index;
  return n;
}

Graph::Node Graph::MatMul(Node a, Node b, bool ta, bool tb) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  const Eigen::Index inner_a = ta ? A.rows() : A.cols();
  const Eigen::Index inner_b = tb ? B.cols() : B.rows();
  if (inner_a != inner_b) throw ConfigError("MatMul: inner dimensions differ");
  Matrix out;
  if (!ta && !tb) out.noalias() = A * B;
  else if (ta && !tb) out.noalias() = A.transpose() * B;
  else if (!ta && tb) out.noalias() = A * B.transpose();
  else out.noalias() = A.transpose() * B.transpose();
  const Node n = Push(std::move(out), Needs(a) || Needs(b));
  if (Needs(n)) {
    nodes_[n].backward = [this, a, b, n, ta, tb] {
      const Matrix& G = nodes_[n].grad;
      const Matrix& A = value(a);
      const Matrix& B = value(b);
      if (Needs(a)) {
        // C = op(A) op(B): dop(A) = G op(B)^T.
        if (!ta && !tb) GradOf(a).noalias() += G * B.transpose();
        else if (!ta && tb) GradOf(a).noalias() += G * B;
        else if (ta && !tb) GradOf(a).noalias() += B * G.transpose();
        else GradOf(a).noalias() += B.transpose() * G.transpose();
      }
      if (Needs(b)) {
        if (!ta && !tb) GradOf(b).noalias() += A.transpose() * G;
        else if (ta && !tb) GradOf(b).noalias() += A * G;
        else if (!ta && tb) GradOf(b).noalias() += G.transpose() * A;
        else GradOf(b).noalias() += G.transpose() * A.transpose();
      }
    };
  }
  return n;
}

Graph::Node Graph::Add(Node a, Node b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
    throw ConfigError("Add: shape mismatch");
  }
  const Node n = Push(value(a) + value(b), Needs(a) || Needs(b));
  if (Needs(n)) {
    nodes_[n].backward = [this, a, b, n] {
      if (Needs(a)) GradOf(a) += nodes_[n].grad;
      if (Needs(b)) GradOf(b) += nodes_[n].grad;
    };
  }
  return n;
}

Graph::Node Graph::AddBias(Node x, Node bias) {
  if (value(bias).cols() != 1 || value(bias).rows() != value(x).rows()) {
    throw ConfigError("AddBias: bias must be a column matching the rows");
  }
  Matrix out = value(x);
  out.colwise() += value(bias).col(0);
  const Node n = Push(std::move(out), Needs(x) || Needs(bias));
  if (Needs(n)) {
    nodes_[n].backward = [this, x, bias, n] {
      const Matrix& G = nodes_[n].grad;
      if (Needs(x)) GradOf(x) += G;
      if (Needs(bias)) GradOf(bias) += G.rowwise().sum();
    };
  }
  return n;
}

Graph::Node Graph::Scale(Node x, double s) {
  const Node n = Push(value(x) * s, Needs(x));
  if (Needs(n)) {
    nodes_[n].backward = [this, x, n, s] { GradOf(x) += nodes_[n].grad * s; };
  }
  return n;
}

Graph::Node Graph::Silu(Node x) {
  const Matrix& X = value(x);
  Matrix sig = (1.0 + (-X.array()).exp()).inverse().matrix();
  Matrix out = (X.array() * sig.array()).matrix();
  const Node n = Push(std::move(out), Needs(x));
  if (Needs(n)) {
    nodes_[n].backward = [this, x, n, sig = std::move(sig)] {
      const auto& X = value(x).array();
      const auto s = sig.array();
      GradOf(x).array() += nodes_[n].grad.array() * (s * (1.0 + X * (1.0 - s)));
    };
  }
  return n;
}

Graph::Node Graph::LayerNorm(Node x, Node gain, Node bias, double eps) {
  const Matrix& X = value(x);
  const Eigen::Index rows = X.rows();
  if (value(gain).rows() != rows || value(bias).rows() != rows) {
    throw ConfigError("LayerNorm: parameter size mismatch");
  }
  const Eigen::RowVectorXd mean = X.colwise().mean();
  Matrix centered = X.rowwise() - mean;
  const Eigen::RowVectorXd inv_std =
      ((centered.array().square().colwise().sum() / static_cast<double>(rows)) + eps)
          .sqrt()
          .inverse()
          .matrix();
  Matrix xhat = centered.array().rowwise() * inv_std.array();
  Matrix out = (xhat.array().colwise() * value(gain).col(0).array()).matrix();
  out.colwise() += value(bias).col(0);
  const Node n = Push(std::move(out), Needs(x) || Needs(gain) || Needs(bias));
  if (Needs(n)) {
    nodes_[n].backward = [this, x, gain, bias, n, xhat = std::move(xhat), inv_std] {
      const Matrix& G = nodes_[n].grad;
      if (Needs(gain)) GradOf(gain) += (G.array() * xhat.array()).rowwise().sum().matrix();
      if (Needs(bias)) GradOf(bias) += G.rowwise().sum();
      if (Needs(x)) {
        const Matrix dxhat = (G.array().colwise() * value(gain).col(0).array()).matrix();
        const Eigen::RowVectorXd m1 = dxhat.colwise().mean();
        const Eigen::RowVectorXd m2 = (dxhat.array() * xhat.array()).colwise().mean().matrix();
        Matrix dx = dxhat.rowwise() - m1;
        dx -= (xhat.array().rowwise() * m2.array()).matrix();
        GradOf(x) += (dx.array().rowwise() * inv_std.array()).matrix();
      }
    };
  }
  return n;
}

Graph::Node Graph::SoftmaxColumns(Node x) {
  const Matrix& X = value(x);
  Matrix out = X.rowwise() - X.colwise().maxCoeff();
  out = out.array().exp().matrix();
  out.array().rowwise() /= out.colwise().sum().array();
  const Node n = Push(std::move(out), Needs(x));
  if (Needs(n)) {
    nodes_[n].backward = [this, x, n] {
      const Matrix& Y = nodes_[n].value;
      const Matrix& G = nodes_[n].grad;
      const Eigen::RowVectorXd dot = (G.array() * Y.array()).colwise().sum().matrix();
      GradOf(x) += (Y.array() * (G.rowwise() - dot).array()).matrix();
    };
  }
  return n;
}

Graph::Node Graph::Rows(Node x, int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > value(x).rows()) {
    throw ConfigError("Rows: slice out of range");
  }
  const Node n = Push(value(x).middleRows(begin, count), Needs(x));
  if (Needs(n)) {
    nodes_[n].backward = [this, x, n, begin, count] {
      GradOf(x).middleRows(begin, count) += nodes_[n].grad;
    };
  }
  return n;
}

Graph::Node Graph::ConcatRows(std::span<const Node> parts) {
  if (parts.empty()) throw ConfigError("ConcatRows: nothing to concatenate");
  Eigen::Index rows = 0;
  const Eigen::Index cols = value(parts[0]).cols();
  bool needs = false;
  for (Node p : parts) {
    if (value(p).cols() != cols) throw ConfigError("ConcatRows: column count mismatch");
    rows += value(p).rows();
    needs = needs || Needs(p);
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Node p : parts) {
    out.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  const Node n = Push(std::move(out), needs);
  if (Needs(n)) {
    std::vector<Node> ids(parts.begin(), parts.end());
    nodes_[n].backward = [this, n, ids = std::move(ids)] {
      Eigen::Index at = 0;
      for (Node p : ids) {
        const Eigen::Index r = value(p).rows();
        if (Needs(p)) GradOf(p) += nodes_[n].grad.middleRows(at, r);
        at += r;
      }
    };
  }
  return n;
}

Graph::Node Graph::DepthwiseConv(Node x, Node kernel, Node bias) {
  const Matrix& X = value(x);
  const Matrix& K = value(kernel);
  const Eigen::Index channels = X.rows();
  const Eigen::Index frames = X.cols();
  const Eigen::Index width = K.cols();
  if (K.rows() != channels || width % 2 == 0 || value(bias).rows() != channels) {
    throw ConfigError("DepthwiseConv: kernel must be C x k with odd k");
  }
  const Eigen::Index half = width / 2;
  Matrix out(channels, frames);
  out.colwise() = value(bias).col(0);
  for (Eigen::Index j = 0; j < width; ++j) {
    const Eigen::Index shift = j - half;  // out[:, l] += K[:, j] * x[:, l + shift]
    const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index hi = std::min<Eigen::Index>(frames, frames - shift);
    if (hi <= lo) continue;
    out.middleCols(lo, hi - lo).array() +=
        X.middleCols(lo + shift, hi - lo).array().colwise() * K.col(j).array();
  }
  const Node n = Push(std::move(out), Needs(x) || Needs(kernel) || Needs(bias));
  if (Needs(n)) {
    nodes_[n].backward = [this, x, kernel, bias, n, half] {
      const Matrix& G = nodes_[n].grad;
      const Matrix& X = value(x);
      const Matrix& K = value(kernel);
      const Eigen::Index frames = X.cols();
      if (Needs(bias)) GradOf(bias) += G.rowwise().sum();
      for (Eigen::Index j = 0; j < K.cols(); ++j) {
        const Eigen::Index shift = j - half;
        const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
        const Eigen::Index hi = std::min<Eigen::Index>(frames, frames - shift);
        if (hi <= lo) continue;
        const auto g = G.middleCols(lo, hi - lo).array();
        if (Needs(kernel)) {
          GradOf(kernel).col(j) +=
              (g * X.middleCols(lo + shift, hi - lo).array()).rowwise().sum().matrix();
        }
        if (Needs(x)) {
          GradOf(x).middleCols(lo + shift, hi - lo).array() += g.colwise() * K.col(j).array();
        }
      }
    };
  }
  return n;
}

Graph::Node Graph::SoftmaxCrossEntropy(Node logits, std::span<const int> targets,
                                       double weight) {
  const Matrix& X = value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != X.cols()) {
    throw ConfigError("SoftmaxCrossEntropy: one target per column required");
  }
  constexpr double kMaxNll = 27.631021115928547;  // -log(1e-12)
  Matrix probs = X.rowwise() - X.colwise().maxCoeff();
  probs = probs.array().exp().matrix();
  probs.array().rowwise() /= probs.colwise().sum().array();
  std::vector<char> clamped(targets.size(), 0);
  double sum = 0.0;
  for (std::size_t l = 0; l < targets.size(); ++l) {
    const int t = targets[l];
    if (t < 1 || t > X.rows()) throw RangeError("cross-entropy target out of range");
    // log-sum-exp form; identical to -log(p) but exact for tiny p.
    const Eigen::Index c = static_cast<Eigen::Index>(l);
    const double mx = X.col(c).maxCoeff();
    const double lse = mx + std::log((X.col(c).array() - mx).exp().sum());
    double nll = lse - X(t - 1, c);
    if (nll > kMaxNll) {
      nll = kMaxNll;
      clamped[l] = 1;
    }
    sum += nll;
  }
  Matrix out(1, 1);
  out(0, 0) = weight * sum;
  const Node n = Push(std::move(out), Needs(logits));
  if (Needs(n)) {
    std::vector<int> tg(targets.begin(), targets.end());
    nodes_[n].backward = [this, logits, n, weight, probs = std::move(probs),
                          tg = std::move(tg), clamped = std::move(clamped)] {
      const double up = nodes_[n].grad(0, 0) * weight;
      Matrix& G = GradOf(logits);
      for (std::size_t l = 0; l < tg.size(); ++l) {
        if (clamped[l]) continue;
        const Eigen::Index c = static_cast<Eigen::Index>(l);
        G.col(c) += up * probs.col(c);
        G(tg[l] - 1, c) -= up;
      }
    };
  }
  return n;
}

void Graph::Backward(Node root) {
  if (value(root).size() != 1) throw ConfigError("Backward needs a scalar root");
  if (!Needs(root)) return;
  GradOf(root)(0, 0) += 1.0;
  for (Node i = root; i >= 0; --i) {
    Record& r = nodes_[i];
    if (!r.needs_grad || r.grad.size() == 0) continue;
    if (r.backward) r.backward();
    if (r.param >= 0) (*params_)[r.param].grad += r.grad;
  }
}

}  // namespace udse::nn

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

#include <functional>

#include "doctest.h"
#include "error.hpp"
#include "nn/graph.hpp"
#include "nn/layers.hpp"
#include "nn/loss.hpp"
#include "nn/optim.hpp"
#include "rng.hpp"

using namespace udse;
using namespace udse::nn;

namespace {

Matrix RandomMatrix(int rows, int cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.Normal();
  return m;
}

// Central differences over sampled parameter entries; returns the worst
// relative error max(|a - n|) / max(|a|, |n|, 1e-6).
double WorstGradientError(ParameterSet& ps, const std::function<double(Graph&, bool)>& loss,
                          int samples, std::uint64_t seed, double h = 1e-4) {
  ps.ZeroGrad();
  {
    Graph g(&ps);
    loss(g, true);
  }
  Rng rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const int p = static_cast<int>(rng.Below(ps.size()));
    auto& param = ps[p];
    const Eigen::Index i = static_cast<Eigen::Index>(rng.Below(param.value.size()));
    const double analytic = param.grad.data()[i];
    const double saved = param.value.data()[i];
    param.value.data()[i] = saved + h;
    double up, down;
    {
      Graph g(&ps);
      up = loss(g, false);
    }
    param.value.data()[i] = saved - h;
    {
      Graph g(&ps);
      down = loss(g, false);
    }
    param.value.data()[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("softmax closed forms") {
  Matrix z = Matrix::Constant(4, 1, 0.7);
  auto p = SoftmaxColumns(z);
  for (int i = 0; i < 4; ++i) CHECK(p(i, 0) == doctest::Approx(0.25));
  z << std::log(1.0), std::log(2.0), std::log(3.0), std::log(4.0);
  p = SoftmaxColumns(z);
  for (int i = 0; i < 4; ++i) CHECK(p(i, 0) == doctest::Approx((i + 1) / 10.0).epsilon(1e-12));
  const auto shifted = SoftmaxColumns((z.array() + 123.0).matrix());
  CHECK((shifted - p).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("cross entropy closed forms") {
  const Matrix uniform = Matrix::Constant(64, 5, 1.0 / 64);
  CHECK(CrossEntropy(uniform, std::vector<int>{1, 2, 3, 4, 64}) == doctest::Approx(std::log(64.0)));
  Matrix onehot = Matrix::Zero(3, 2);
  onehot(2, 0) = 1.0;
  onehot(0, 1) = 1.0;
  CHECK(CrossEntropy(onehot, std::vector<int>{3, 1}) == 0.0);
  Matrix two(2, 1);
  two << 0.7, 0.3;
  CHECK(CrossEntropy(two, std::vector<int>{1}) == doctest::Approx(-std::log(0.7)));
  CHECK_THROWS_AS(CrossEntropy(two, std::vector<int>{3}), RangeError);
  CHECK_THROWS_AS(CrossEntropy(two, std::vector<int>{1, 1}), ConfigError);
}

TEST_CASE("argmax is 1-based and prefers the lowest index") {
  Matrix m(4, 1);
  m << 0.1, 0.5, 0.5, -1.0;
  CHECK(ArgmaxColumn(m, 0) == 2);
}

TEST_CASE("softmax cross entropy gradient is (p - onehot) * weight") {
  Rng rng(1);
  ParameterSet ps;
  const int z = ps.Add("z", RandomMatrix(5, 3, rng), false);
  const std::vector<int> targets = {2, 5, 1};
  Graph g(&ps);
  ps.ZeroGrad();
  g.Backward(g.SoftmaxCrossEntropy(g.Param(z), targets, 1.0 / 3));
  Matrix expected = SoftmaxColumns(ps[z].value);
  for (int l = 0; l < 3; ++l) expected(targets[l] - 1, l) -= 1.0;
  expected /= 3.0;
  CHECK((ps[z].grad - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("every graph op passes a finite-difference check") {
  Rng rng(2);
  ParameterSet ps;
  const int a = ps.Add("a", RandomMatrix(4, 3, rng), true);
  const int b = ps.Add("b", RandomMatrix(3, 5, rng), true);
  const int gain = ps.Add("gain", RandomMatrix(4, 1, rng), false);
  const int bias = ps.Add("bias", RandomMatrix(4, 1, rng), false);
  const int kernel = ps.Add("kernel", RandomMatrix(4, 3, rng), true);
  const int kbias = ps.Add("kbias", RandomMatrix(4, 1, rng), false);
  const int w = ps.Add("w", RandomMatrix(6, 8, rng), true);
  const Matrix c = RandomMatrix(4, 5, rng);
  const std::vector<int> targets = {1, 6, 3, 2, 4};
  auto loss = [&](Graph& g, bool backward) {
    auto x = g.MatMul(g.Param(a), g.Param(b));
    x = g.Add(x, g.Constant(c));
    x = g.LayerNorm(x, g.Param(gain), g.Param(bias));
    x = g.Silu(x);
    x = g.DepthwiseConv(x, g.Param(kernel), g.Param(kbias));
    auto att = g.SoftmaxColumns(g.Scale(g.MatMul(x, x, true, false), 0.5));
    auto y = g.MatMul(x, att);
    const Graph::Node parts[] = {y, g.Rows(x, 1, 2), g.AddBias(g.Rows(y, 0, 2), g.Rows(g.Param(bias), 0, 2))};
    auto stacked = g.ConcatRows(parts);  // 8 x 5
    auto logits = g.MatMul(g.Param(w), stacked);
    auto ce = g.SoftmaxCrossEntropy(logits, targets, 0.2);
    if (backward) g.Backward(ce);
    return g.value(ce)(0, 0);
  };
  CHECK(WorstGradientError(ps, loss, 60, 3) <= 1e-5);
}

TEST_CASE("a parameter that does not reach the loss gets zero gradient") {
  Rng rng(4);
  ParameterSet ps;
  const int used = ps.Add("used", RandomMatrix(3, 2, rng), true);
  const int unused = ps.Add("unused", RandomMatrix(3, 2, rng), true);
  ps[unused].grad.setConstant(7.0);
  ps.ZeroGrad();
  Graph g(&ps);
  g.Param(unused);
  g.Backward(g.SoftmaxCrossEntropy(g.Param(used), std::vector<int>{1, 2}, 1.0));
  CHECK(ps[unused].grad.isZero(0.0));
  CHECK_FALSE(ps[used].grad.isZero(0.0));
}

TEST_CASE("conformer block: zeroed projections give the identity, shape is kept") {
  Rng rng(5);
  ParameterSet ps;
  BlockConfig cfg;
  cfg.channels = 8;
  cfg.heads = 2;
  cfg.conv_kernel = 3;
  ConformerLiteBlock block(ps, "b", cfg, rng);
  for (int frames : {1, 4, 9}) {
    const Matrix x = RandomMatrix(8, frames, rng);
    Graph g(&ps);
    const auto y = block.Apply(g, g.Constant(x));
    CHECK(g.value(y).rows() == 8);
    CHECK(g.value(y).cols() == frames);
    CHECK((g.value(y) - x).norm() > 0.0);
  }
  block.ZeroOutputProjections(ps);
  const Matrix x = RandomMatrix(8, 6, rng);
  Graph g(&ps);
  CHECK(g.value(block.Apply(g, g.Constant(x))) == x);
}

TEST_CASE("two-block stack passes a finite-difference check") {
  Rng rng(6);
  ParameterSet ps;
  BlockConfig cfg;
  cfg.channels = 8;
  cfg.heads = 2;
  cfg.conv_kernel = 3;
  ConformerLiteBlock b1(ps, "b1", cfg, rng), b2(ps, "b2", cfg, rng);
  const auto head = Linear::Create(ps, "head", 8, 6, rng);
  const Matrix x = RandomMatrix(8, 5, rng);
  const std::vector<int> targets = {1, 2, 3, 4, 5};
  auto loss = [&](Graph& g, bool backward) {
    auto h = b2.Apply(g, b1.Apply(g, g.Constant(x)));
    auto ce = g.SoftmaxCrossEntropy(head.Apply(g, h), targets, 0.2);
    if (backward) g.Backward(ce);
    return g.value(ce)(0, 0);
  };
  CHECK(WorstGradientError(ps, loss, 80, 7) <= 1e-5);
}

TEST_CASE("learning-rate schedule boundaries") {
  AdamWConfig cfg;
  cfg.lr = 2e-3;
  cfg.warmup_steps = 10;
  cfg.total_steps = 110;
  CHECK(ScheduledLearningRate(cfg, 5) == doctest::Approx(1e-3));
  CHECK(ScheduledLearningRate(cfg, 10) == doctest::Approx(2e-3));
  CHECK(ScheduledLearningRate(cfg, 60) == doctest::Approx(1e-3));
  CHECK(ScheduledLearningRate(cfg, 110) == doctest::Approx(0.0));
}

TEST_CASE("one AdamW step matches a hand computation") {
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.01;
  cfg.warmup_steps = 1;
  cfg.total_steps = 1000;
  ParameterSet ps;
  const int p = ps.Add("p", Matrix::Constant(1, 1, 2.0), true);
  ps[p].grad.setConstant(1.0);
  AdamW opt(cfg, ps);
  const double lr = opt.Step(ps);
  CHECK(lr == doctest::Approx(0.1));
  // m_hat = 1, v_hat = 1 after bias correction.
  const double expected = 2.0 * (1.0 - 0.1 * 0.01) - 0.1 * (1.0 / (1.0 + 1e-8));
  CHECK(ps[p].value(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(opt.first_moments()[0](0, 0) == doctest::Approx(0.1));
  CHECK(opt.second_moments()[0](0, 0) == doctest::Approx(0.05));
}

TEST_CASE("weight decay skips parameters marked no-decay") {
  AdamWConfig cfg;
  cfg.weight_decay = 0.5;
  cfg.warmup_steps = 1;
  ParameterSet ps;
  const int p = ps.Add("p", Matrix::Constant(1, 1, 1.0), false);
  ps[p].grad.setZero();
  AdamW opt(cfg, ps);
  opt.Step(ps);
  CHECK(ps[p].value(0, 0) == 1.0);
}

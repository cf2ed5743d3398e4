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

#include "doctest.h"
#include "error.hpp"
#include "nn/loss.hpp"
#include "test_util.hpp"
#include "udse_model.hpp"

using namespace udse;
using namespace udse::model;

namespace {

ModelConfig Tiny() {
  ModelConfig cfg;
  cfg.channels = 16;
  cfg.heads = 2;
  cfg.global_blocks = 2;
  cfg.predictor_blocks = 2;
  cfg.conv_kernel = 3;
  return cfg;
}

// Codec with N = 2, M = 8, K = 8.
rvq::Codec TinyCodec(std::uint64_t seed = 3) { return test::RandomCodec(2, 8, 16, seed); }

TrainExample Example(const rvq::Codec& codec, std::uint64_t seed, std::size_t length = 120) {
  const auto clean = test::WhiteNoise(length, 16000, seed, 0.3);
  auto degraded = clean;
  Rng rng(seed + 1);
  for (auto& s : degraded.samples) s += 0.1 * rng.Normal();
  return PrepareExample(codec, clean, degraded, "ex" + std::to_string(seed));
}

// Mirrors the training objective through the public graph pieces.
double Loss(const UdseModel& m, const rvq::Codec& codec, const TrainExample& ex,
            std::uint64_t seed, nn::Graph& g, bool backward) {
  const auto G = m.GlobalFeature(g, ex.features, ex.quantized);
  const auto initial = m.InitialInput(ex.features.cols(), seed);
  const double weight = 1.0 / static_cast<double>(m.stages() * ex.features.cols());
  nn::Graph::Node total = -1;
  for (int n = 1; n <= m.stages(); ++n) {
    const auto logits = m.StageLogits(g, n, G, m.StageInput(codec, n, ex.clean_tokens, initial));
    std::vector<int> targets(ex.clean_tokens.row(n - 1).begin(), ex.clean_tokens.row(n - 1).end());
    const auto ce = g.SoftmaxCrossEntropy(logits, targets, weight);
    total = total < 0 ? ce : g.Add(total, ce);
  }
  if (backward) g.Backward(total);
  return g.value(total)(0, 0);
}

}  // namespace

TEST_CASE("loss semantics of the cascade objective") {
  const std::vector<Eigen::MatrixXd> uniform(2, Eigen::MatrixXd::Constant(64, 3, 1.0 / 64));
  TokenGrid gt(2, 3);
  gt << 1, 7, 64, 2, 2, 9;
  CHECK(UdseLoss(uniform, gt) == doctest::Approx(std::log(64.0)).epsilon(1e-9));
  std::vector<Eigen::MatrixXd> perfect(2, Eigen::MatrixXd::Zero(64, 3));
  for (int n = 0; n < 2; ++n) {
    for (int l = 0; l < 3; ++l) perfect[n](gt(n, l) - 1, l) = 1.0;
  }
  CHECK(UdseLoss(perfect, gt) == 0.0);
  std::vector<Eigen::MatrixXd> hand(2, Eigen::MatrixXd::Zero(2, 1));
  hand[0] << 0.5, 0.5;
  hand[1] << 0.75, 0.25;
  TokenGrid one(2, 1);
  one << 1, 2;
  CHECK(UdseLoss(hand, one) == doctest::Approx((-std::log(0.5) - std::log(0.25)) / 2));
}

TEST_CASE("global feature shape and the zero-block identity") {
  const auto codec = TinyCodec();
  UdseModel m(Tiny(), codec);
  const auto ex = Example(codec, 1);
  const auto G = m.ExtractGlobal(ex.features, ex.quantized);
  CHECK(G.rows() == 16);
  CHECK(G.cols() == ex.features.cols());
  m.ZeroBlockOutputs();
  Eigen::MatrixXd stacked(3 * 8, ex.features.cols());
  stacked << ex.features, ex.quantized[0], ex.quantized[1];
  const auto& p = m.params();
  const Eigen::MatrixXd expected =
      (p[p.Find("fp.input.weight")].value * stacked).colwise() +
      p[p.Find("fp.input.bias")].value.col(0);
  CHECK((m.ExtractGlobal(ex.features, ex.quantized) - expected).cwiseAbs().maxCoeff() < 1e-12);
  std::vector<rvq::FeatureMatrix> one(ex.quantized.begin(), ex.quantized.begin() + 1);
  CHECK_THROWS_AS(m.ExtractGlobal(ex.features, one), ConfigError);
}

TEST_CASE("every quantized stage influences the global feature") {
  const auto codec = TinyCodec();
  const UdseModel m(Tiny(), codec);
  const auto ex = Example(codec, 2);
  const auto base = m.ExtractGlobal(ex.features, ex.quantized);
  for (std::size_t n = 0; n < ex.quantized.size(); ++n) {
    auto q = ex.quantized;
    q[n](0, 0) += 0.5;
    CHECK((m.ExtractGlobal(ex.features, q) - base).norm() > 0.0);
  }
}

TEST_CASE("stage input wiring follows the previous tokens") {
  const auto codec = TinyCodec();
  const UdseModel m(Tiny(), codec);
  TokenGrid tokens = TokenGrid::Ones(2, 4);
  const auto initial = m.InitialInput(4, 9);
  const auto a = m.StageInput(codec, 2, tokens, initial);
  tokens(0, 2) = 5;
  const auto b = m.StageInput(codec, 2, tokens, initial);
  const Eigen::VectorXd diff = b.col(2) - a.col(2);
  CHECK((diff - (codec.stage(0).codeword(5) - codec.stage(0).codeword(1))).norm() < 1e-12);
  CHECK((b.col(1) - a.col(1)).norm() == 0.0);
  CHECK(m.StageInput(codec, 1, tokens, initial) == initial);
}

TEST_CASE("forcing a stage-1 token reaches stage 2 only in sequential mode") {
  const auto codec = TinyCodec();
  const auto ex = Example(codec, 3);
  for (bool parallel : {false, true}) {
    auto cfg = Tiny();
    cfg.parallel_mode = parallel;
    const UdseModel m(cfg, codec);
    const auto G = m.ExtractGlobal(ex.features, ex.quantized);
    const auto free = m.PredictTokens(codec, G, 5);
    TokenGrid forced = TokenGrid::Zero(2, G.cols());
    forced(0, 0) = free.tokens(0, 0) % 8 + 1;
    const auto pushed = m.PredictTokens(codec, G, 5, &forced);
    CHECK(pushed.tokens(0, 0) == forced(0, 0));
    const double change = (pushed.logits[1] - free.logits[1]).norm();
    if (parallel) {
      CHECK(change == 0.0);
    } else {
      CHECK(change > 0.0);
    }
  }
}

TEST_CASE("first-stage-only conditioning hides G from later stages") {
  const auto codec = TinyCodec();
  auto cfg = Tiny();
  cfg.global_condition_first_only = true;
  const UdseModel m(cfg, codec);
  const auto ex = Example(codec, 4);
  const auto G = m.ExtractGlobal(ex.features, ex.quantized);
  const auto a = m.PredictTokens(codec, G, 5);
  TokenGrid forced = a.tokens;
  forced.row(1).setZero();
  const Eigen::MatrixXd G2 = G + Eigen::MatrixXd::Constant(G.rows(), G.cols(), 0.3);
  const auto b = m.PredictTokens(codec, G2, 5, &forced);
  CHECK((b.logits[0] - a.logits[0]).norm() > 0.0);
  CHECK(b.logits[1] == a.logits[1]);
}

TEST_CASE("argmax is unchanged by a constant logit shift") {
  Eigen::MatrixXd z(5, 3);
  Rng rng(1);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.Normal();
  const Eigen::MatrixXd shifted = (z.array() + 4.2).matrix();
  for (int l = 0; l < 3; ++l) CHECK(nn::ArgmaxColumn(z, l) == nn::ArgmaxColumn(shifted, l));
}

TEST_CASE("teacher forcing equals inference when predictions match ground truth") {
  const auto codec = TinyCodec();
  const UdseModel m(Tiny(), codec);
  const auto ex = Example(codec, 6);
  const auto G = m.ExtractGlobal(ex.features, ex.quantized);
  const auto pred = m.PredictTokens(codec, G, 11);
  const auto tf = m.TeacherForcedLogits(codec, G, pred.tokens, 11);
  for (int n = 0; n < 2; ++n) CHECK(tf[n] == pred.logits[n]);
  // Stage 1 never looks at the ground truth, and probabilities are stochastic.
  TokenGrid other = pred.tokens;
  other.row(0).setConstant(1);
  other.row(1).setConstant(2);
  const auto tf2 = m.TeacherForcedLogits(codec, G, other, 11);
  CHECK(tf2[0] == tf[0]);
  const auto probs = nn::SoftmaxColumns(tf[1]);
  for (Eigen::Index l = 0; l < probs.cols(); ++l) CHECK(std::abs(probs.col(l).sum() - 1.0) < 1e-6);
}

TEST_CASE("model gradients match central differences") {
  const auto codec = TinyCodec();
  UdseModel m(Tiny(), codec);
  const auto ex = Example(codec, 7);
  auto& ps = m.params();
  ps.ZeroGrad();
  {
    nn::Graph g(&ps);
    Loss(m, codec, ex, 5, g, true);
  }
  Rng rng(13);
  double worst = 0.0;
  const double h = 1e-4;
  for (int s = 0; s < 50; ++s) {
    auto& p = ps[static_cast<int>(rng.Below(ps.size()))];
    const Eigen::Index i = static_cast<Eigen::Index>(rng.Below(p.value.size()));
    const double saved = p.value.data()[i];
    p.value.data()[i] = saved + h;
    nn::Graph g1(&ps);
    const double up = Loss(m, codec, ex, 5, g1, false);
    p.value.data()[i] = saved - h;
    nn::Graph g2(&ps);
    const double down = Loss(m, codec, ex, 5, g2, false);
    p.value.data()[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = p.grad.data()[i];
    worst = std::max(worst, std::abs(numeric - analytic) /
                                std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("prediction is deterministic for fixed model, input and seed") {
  const auto codec = TinyCodec();
  const UdseModel m(Tiny(), codec);
  const auto ex = Example(codec, 8);
  const auto G = m.ExtractGlobal(ex.features, ex.quantized);
  CHECK(m.PredictTokens(codec, G, 3).tokens == m.PredictTokens(codec, G, 3).tokens);
  auto fixed = Tiny();
  fixed.fixed_initial_tokens = true;
  const UdseModel mf(fixed, codec);
  CHECK(mf.InitialInput(6, 1) == mf.InitialInput(6, 2));
  CHECK(m.InitialInput(6, 1) != m.InitialInput(6, 2));
}

TEST_CASE("oracle tokens reproduce the codec round trip exactly") {
  const auto codec = TinyCodec();
  const UdseModel m(Tiny(), codec);
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto clean = test::WhiteNoise(97 + 13 * s, 16000, 40 + s);
    const auto degraded = test::WhiteNoise(clean.size(), 16000, 50 + s);
    const auto gt = codec.Quantize(codec.Encode(clean)).grid;
    const auto out = Enhance(m, codec, degraded, 1, &gt);
    CHECK(out.audio == codec.Decode(gt, clean.size()));
    CHECK(out.audio.size() == clean.size());
    CHECK(Enhance(m, codec, degraded, 1).audio.size() == degraded.size());
  }
}

TEST_CASE("checkpoints round trip and refuse another codec") {
  const auto codec = TinyCodec(3);
  auto cfg = Tiny();
  cfg.conditioning = Conditioning::kAdd;
  UdseModel m(cfg, codec);
  m.params().RoundToFloat();
  test::TempDir dir;
  m.Save(dir / "m.udsenn");
  const auto back = UdseModel::Load(dir / "m.udsenn", codec);
  CHECK(back == m);
  const auto other = TinyCodec(4);
  try {
    UdseModel::Load(dir / "m.udsenn", other);
    FAIL("expected a hash mismatch");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("codec hash mismatch") != std::string::npos);
  }
  auto bytes = m.Serialize();
  bytes[bytes.size() - 20] ^= 1;
  CHECK_THROWS_AS(UdseModel::Deserialize(bytes, codec), ParseError);
}

TEST_CASE("a short training run lowers the loss, leaves the codec alone and is reproducible") {
  const auto codec = TinyCodec();
  std::vector<TrainExample> data = {Example(codec, 20), Example(codec, 21)};
  TrainConfig tc;
  tc.steps = 40;
  tc.optim.warmup_steps = 2;
  tc.optim.total_steps = 40;
  tc.optim.lr = 3e-3;
  const auto codec_bytes = codec.Serialize();
  UdseModel a(Tiny(), codec), b(Tiny(), codec);
  const auto la = Train(a, codec, data, tc);
  const auto lb = Train(b, codec, data, tc);
  CHECK(codec.Serialize() == codec_bytes);
  CHECK(la.Format() == lb.Format());
  CHECK(a == b);
  CHECK(EvaluateLoss(a, codec, data, 1).loss < la.initial_loss);
  TrainConfig zero = tc;
  zero.steps = 0;
  CHECK_THROWS_AS(Train(a, codec, data, zero), ConfigError);
}

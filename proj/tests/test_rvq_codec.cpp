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
#include "metrics.hpp"
#include "rvq_codec.hpp"
#include "synth.hpp"
#include "test_util.hpp"

using namespace udse;
using namespace udse::rvq;

namespace {

Codebook Scalar(std::initializer_list<double> values) {
  Eigen::MatrixXd cw(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) cw(0, i++) = v;
  return Codebook(cw);
}

}  // namespace

TEST_CASE("exact codeword gives its token and a zero residual") {
  Rng rng(3);
  Eigen::MatrixXd cw(6, 5);
  for (Eigen::Index i = 0; i < cw.size(); ++i) cw.data()[i] = rng.Normal();
  const Codebook cb(cw);
  const auto out = QuantizeStage(cb, cw.col(2));
  CHECK(out.tokens == TokenRow{3});
  CHECK((cw.col(2) - out.quantized).norm() == 0.0);
}

TEST_CASE("ties go to the lowest index") {
  const Codebook cb = Scalar({-1.0, 1.0});
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 1);
  CHECK(QuantizeStage(cb, x).tokens == TokenRow{1});
  const Codebook dup = Scalar({2.0, 0.5, 0.5});
  x(0, 0) = 0.5;
  CHECK(QuantizeStage(dup, x).tokens == TokenRow{2});
}

TEST_CASE("two-stage scalar example agrees with brute force over pairs") {
  const Codebook c1 = Scalar({-1.0, 1.0});
  const Codebook c2 = Scalar({-0.25, 0.25});
  FeatureMatrix e(1, 1);
  e(0, 0) = 0.8;
  const auto s1 = QuantizeStage(c1, e);
  CHECK(s1.tokens[0] == 2);
  const FeatureMatrix r = e - s1.quantized;
  CHECK(r(0, 0) == doctest::Approx(-0.2));
  const auto s2 = QuantizeStage(c2, r);
  CHECK(s2.tokens[0] == 1);
  const double recon = (s1.quantized + s2.quantized)(0, 0);
  CHECK(recon == doctest::Approx(0.75));
  double best = 1e9;
  for (double a : {-1.0, 1.0}) {
    for (double b : {-0.25, 0.25}) best = std::min(best, std::abs(0.8 - a - b));
  }
  CHECK(std::abs(0.8 - recon) == doctest::Approx(best));
}

TEST_CASE("quantize_stage matches exhaustive search on random data") {
  Rng rng(12);
  Eigen::MatrixXd cw(8, 256), x(8, 300);
  for (Eigen::Index i = 0; i < cw.size(); ++i) cw.data()[i] = rng.Normal();
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.Normal();
  // Duplicate a codeword to force ties.
  cw.col(200) = cw.col(17);
  x.col(0) = cw.col(17);
  const Codebook cb(cw);
  const auto out = QuantizeStage(cb, x);
  for (Eigen::Index l = 0; l < x.cols(); ++l) {
    CHECK(out.tokens[l] == test::BruteNearest(cw, x.col(l)));
  }
  CHECK(out.tokens[0] == 18);
}

TEST_CASE("lookup identities and range errors") {
  Rng rng(5);
  Eigen::MatrixXd cw(4, 6);
  for (Eigen::Index i = 0; i < cw.size(); ++i) cw.data()[i] = rng.Normal();
  const Codebook cb(cw);
  const auto all3 = Lookup(cb, std::vector<int>(5, 3));
  for (Eigen::Index l = 0; l < 5; ++l) CHECK(all3.col(l) == cw.col(2));
  Eigen::MatrixXd x(4, 9);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.Normal();
  const auto q = QuantizeStage(cb, x);
  CHECK(Lookup(cb, q.tokens) == q.quantized);
  CHECK_THROWS_AS(Lookup(cb, std::vector<int>{0}), RangeError);
  CHECK_THROWS_AS(Lookup(cb, std::vector<int>{7}), RangeError);
}

TEST_CASE("residual cascade telescopes and never grows") {
  const auto codec = test::RandomCodec(5, 32, 16, 9);
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd e(8, 20);
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.Normal();
    const auto q = codec.Quantize(e);
    REQUIRE(q.residuals.size() == 6);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(8, 20);
    for (const auto& s : q.quantized) sum += s;
    CHECK((e - sum - q.residuals.back()).norm() <= 1e-10 * e.norm());
    for (std::size_t n = 0; n + 1 < q.residuals.size(); ++n) {
      CHECK(q.residuals[n + 1].norm() <= q.residuals[n].norm());
    }
    // Adding the stage outputs in reverse order changes nothing beyond 1e-12.
    Eigen::MatrixXd rev = Eigen::MatrixXd::Zero(8, 20);
    for (auto it = q.quantized.rbegin(); it != q.quantized.rend(); ++it) rev += *it;
    CHECK((rev - sum).norm() <= 1e-12 * sum.norm());
    CHECK(codec.Dequantize(q.grid, 1) == Lookup(codec.stage(0), std::vector<int>(q.grid.row(0).begin(), q.grid.row(0).end())));
  }
}

TEST_CASE("requantizing a codeword sum is a fixed point") {
  const auto codec = test::RandomCodec(1, 16, 16, 4);
  TokenGrid grid(1, 6);
  grid << 1, 5, 9, 16, 2, 2;
  CHECK(codec.Quantize(codec.Dequantize(grid)).grid == grid);
}

TEST_CASE("encode of zeros is the negated normalization offset") {
  CodecMetadata meta;
  meta.frame_length = 8;
  Eigen::VectorXd mean(4), scale(4);
  mean << 1.0, -2.0, 0.5, 0.0;
  scale << 2.0, 1.0, 4.0, 1.0;
  const Codec codec({Codebook(Eigen::MatrixXd::Zero(4, 2))}, mean, scale, meta);
  const auto e = codec.Encode({std::vector<double>(40, 0.0), 16000});
  CHECK(static_cast<std::size_t>(e.cols()) == codec.FrameCount(40));
  for (Eigen::Index l = 0; l < e.cols(); ++l) {
    for (int k = 0; k < 4; ++k) CHECK(e(k, l) == doctest::Approx(-mean(k) / scale(k)));
  }
}

TEST_CASE("zero grid on a zero codeword decodes to silence and decode is deterministic") {
  const auto codec = test::RandomCodec(2, 8, 32, 1);
  const TokenGrid grid = TokenGrid::Ones(2, 10);
  const auto a = codec.Decode(grid, 150);
  CHECK(a.size() == 150);
  for (double s : a.samples) CHECK(std::abs(s) <= 1e-3);
  CHECK(codec.Decode(grid, 150) == a);
  TokenGrid bad = grid;
  bad(1, 3) = 9;
  CHECK_THROWS_AS(codec.Decode(bad, 150), RangeError);
}

TEST_CASE("k-means closed forms and separated clusters") {
  Eigen::MatrixXd two(1, 2);
  two << 1.0, 3.0;
  const auto one = Kmeans(two, 1, 1);
  CHECK(one.centroids(0, 0) == doctest::Approx(2.0));

  Rng rng(4);
  const double means[4][2] = {{-5, -5}, {5, -5}, {-5, 5}, {5, 5}};
  Eigen::MatrixXd pts(2, 400);
  for (int i = 0; i < 400; ++i) {
    pts(0, i) = means[i % 4][0] + 0.3 * rng.Normal();
    pts(1, i) = means[i % 4][1] + 0.3 * rng.Normal();
  }
  const auto km = Kmeans(pts, 4, 3);
  for (const auto& m : means) {
    double best = 1e9;
    for (int c = 0; c < 4; ++c) {
      best = std::min(best, std::hypot(km.centroids(0, c) - m[0], km.centroids(1, c) - m[1]));
    }
    CHECK(best < 0.1);
  }
}

TEST_CASE("a second stage trained on residuals lowers training error") {
  Rng rng(8);
  Eigen::MatrixXd data(4, 800);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = rng.Normal();
  const auto books = TrainCodebooks(data, 2, 16, 5);
  const auto s1 = QuantizeStage(books[0], data);
  const Eigen::MatrixXd r1 = data - s1.quantized;
  const auto s2 = QuantizeStage(books[1], r1);
  CHECK((r1 - s2.quantized).squaredNorm() <= r1.squaredNorm());
  CHECK(books[0].codewords().col(0).isZero(0.0));
}

TEST_CASE("trained codec: more stages never hurt and checkpoints are exact") {
  std::vector<Waveform> clips;
  for (int i = 0; i < 12; ++i) clips.push_back(synth::SpeechLike({}, 100 + i));
  CodecTrainConfig cfg;
  cfg.stages = 3;
  cfg.codebook_size = 16;
  const Codec codec = TrainCodec(clips, cfg);
  for (const auto& c : clips) {
    double prev = -1e9;
    for (int n = 1; n <= 3; ++n) {
      const double s = eval::SiSnr(codec.RoundTrip(c, n), c);
      CHECK(s >= prev);
      prev = s;
    }
  }
  test::TempDir dir;
  codec.Save(dir / "c.udsecdc");
  const Codec back = Codec::Load(dir / "c.udsecdc");
  CHECK(back == codec);
  CHECK(back.ContentHash() == codec.ContentHash());
  auto bytes = codec.Serialize();
  bytes[bytes.size() / 2] ^= 0x40;
  CHECK_THROWS_AS(Codec::Deserialize(bytes), ParseError);
}

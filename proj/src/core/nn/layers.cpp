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

#include "nn/layers.hpp"

#include <cmath>
#include <vector>

#include "error.hpp"

namespace udse::nn {
namespace {

Matrix Uniform(int rows, int cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.Uniform(-bound, bound);
  }
  return m;
}

}  // namespace

Linear Linear::Create(ParameterSet& ps, const std::string& name, int in, int out, Rng& rng) {
  Linear l;
  const double bound = std::sqrt(6.0 / (in + out));
  l.weight = ps.Add(name + ".weight", Uniform(out, in, bound, rng), true);
  l.bias = ps.Add(name + ".bias", Matrix::Zero(out, 1), false);
  return l;
}

Graph::Node Linear::Apply(Graph& g, Graph::Node x) const {
  return g.AddBias(g.MatMul(g.Param(weight), x), g.Param(bias));
}

void Linear::ZeroInit(ParameterSet& ps) const {
  ps[weight].value.setZero();
  ps[bias].value.setZero();
}

LayerNormParams LayerNormParams::Create(ParameterSet& ps, const std::string& name, int width) {
  LayerNormParams p;
  p.gain = ps.Add(name + ".gain", Matrix::Ones(width, 1), false);
  p.bias = ps.Add(name + ".bias", Matrix::Zero(width, 1), false);
  return p;
}

Graph::Node LayerNormParams::Apply(Graph& g, Graph::Node x) const {
  return g.LayerNorm(x, g.Param(gain), g.Param(bias));
}

ConformerLiteBlock::ConformerLiteBlock(ParameterSet& ps, const std::string& name,
                                       const BlockConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  const int c = cfg.channels;
  if (c < 1 || cfg.heads < 1 || c % cfg.heads != 0) {
    throw ConfigError("channels must be a positive multiple of heads");
  }
  if (cfg.conv_kernel < 1 || cfg.conv_kernel % 2 == 0) {
    throw ConfigError("convolution kernel must be odd");
  }
  if (cfg.ffn_expansion < 1) throw ConfigError("FFN expansion must be positive");
  ln_attn_ = LayerNormParams::Create(ps, name + ".attn_norm", c);
  query_ = Linear::Create(ps, name + ".attn.query", c, c, rng);
  key_ = Linear::Create(ps, name + ".attn.key", c, c, rng);
  value_ = Linear::Create(ps, name + ".attn.value", c, c, rng);
  attn_out_ = Linear::Create(ps, name + ".attn.out", c, c, rng);
  ln_ffn_ = LayerNormParams::Create(ps, name + ".ffn_norm", c);
  ffn_in_ = Linear::Create(ps, name + ".ffn.in", c, c * cfg.ffn_expansion, rng);
  ffn_out_ = Linear::Create(ps, name + ".ffn.out", c * cfg.ffn_expansion, c, rng);
  if (cfg.use_conv) {
    ln_conv_ = LayerNormParams::Create(ps, name + ".conv_norm", c);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.conv_kernel));
    dw_kernel_ = ps.Add(name + ".conv.depthwise.weight", Uniform(c, cfg.conv_kernel, bound, rng), true);
    dw_bias_ = ps.Add(name + ".conv.depthwise.bias", Matrix::Zero(c, 1), false);
    conv_out_ = Linear::Create(ps, name + ".conv.pointwise", c, c, rng);
  }
}

Graph::Node ConformerLiteBlock::Attention(Graph& g, Graph::Node h) const {
  const int heads = cfg_.heads;
  const int width = cfg_.channels / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(width));
  const auto q = query_.Apply(g, h);
  const auto k = key_.Apply(g, h);
  const auto v = value_.Apply(g, h);
  std::vector<Graph::Node> outputs;
  outputs.reserve(heads);
  for (int i = 0; i < heads; ++i) {
    const auto qi = g.Rows(q, i * width, width);
    const auto ki = g.Rows(k, i * width, width);
    const auto vi = g.Rows(v, i * width, width);
    // scores(key, query); softmax runs over keys within each query column.
    const auto scores = g.Scale(g.MatMul(ki, qi, true, false), scale);
    const auto weights = g.SoftmaxColumns(scores);
    outputs.push_back(g.MatMul(vi, weights));
  }
  return attn_out_.Apply(g, heads == 1 ? outputs[0] : g.ConcatRows(outputs));
}

Graph::Node ConformerLiteBlock::Apply(Graph& g, Graph::Node x) const {
  auto a = g.Add(x, Attention(g, ln_attn_.Apply(g, x)));
  auto ffn = ffn_out_.Apply(g, g.Silu(ffn_in_.Apply(g, ln_ffn_.Apply(g, a))));
  auto b = g.Add(a, ffn);
  if (!cfg_.use_conv) return b;
  auto conv = g.DepthwiseConv(ln_conv_.Apply(g, b), g.Param(dw_kernel_), g.Param(dw_bias_));
  return g.Add(b, conv_out_.Apply(g, g.Silu(conv)));
}

void ConformerLiteBlock::ZeroOutputProjections(ParameterSet& ps) const {
  attn_out_.ZeroInit(ps);
  ffn_out_.ZeroInit(ps);
  if (cfg_.use_conv) conv_out_.ZeroInit(ps);
}

}  // namespace udse::nn

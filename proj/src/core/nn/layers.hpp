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

#include <string>

#include "nn/graph.hpp"
#include "rng.hpp"

namespace udse::nn {

struct Linear {
  int weight = -1;  // out x in
  int bias = -1;    // out x 1

  static Linear Create(ParameterSet& ps, const std::string& name, int in, int out, Rng& rng);
  Graph::Node Apply(Graph& g, Graph::Node x) const;
  void ZeroInit(ParameterSet& ps) const;
};

struct LayerNormParams {
  int gain = -1;
  int bias = -1;

  static LayerNormParams Create(ParameterSet& ps, const std::string& name, int width);
  Graph::Node Apply(Graph& g, Graph::Node x) const;
};

struct BlockConfig {
  int channels = 64;
  int heads = 4;
  int conv_kernel = 7;
  int ffn_expansion = 4;
  /// false drops the convolution module (attention + FFN only).
  bool use_conv = true;
};

/// Reduced Conformer block over a C x L sequence, pre-norm with a residual
/// around each sub-module:
///   a = x + MHSA(LN(x));  b = a + FFN(LN(a));  y = b + PW(SiLU(DWConv(LN(b))))
/// so y = x + Block(x) and zeroing the three output projections makes the
/// block the identity.
class ConformerLiteBlock {
 public:
  ConformerLiteBlock() = default;
  ConformerLiteBlock(ParameterSet& ps, const std::string& name, const BlockConfig& cfg, Rng& rng);

  Graph::Node Apply(Graph& g, Graph::Node x) const;
  void ZeroOutputProjections(ParameterSet& ps) const;

 private:
  Graph::Node Attention(Graph& g, Graph::Node h) const;

  BlockConfig cfg_;
  LayerNormParams ln_attn_, ln_ffn_, ln_conv_;
  Linear query_, key_, value_, attn_out_;
  Linear ffn_in_, ffn_out_;
  int dw_kernel_ = -1, dw_bias_ = -1;
  Linear conv_out_;
};

}  // namespace udse::nn

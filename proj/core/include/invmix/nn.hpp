/*
 * Copyright 2026 The inversedmix Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Small transformer building blocks shared by the task encoder and the local
// decoder backend.

#include "invmix/autograd.hpp"

#include <random>
#include <span>
#include <string>
#include <vector>

namespace invmix::nn {

using ag::Graph;
using ag::Matrix;
using ag::Parameter;
using ag::Var;

/// Binds `p` as trainable when `train`, otherwise as a frozen constant.
inline Var bind(Graph& g, Parameter& p, bool train) { return train ? g.param(p) : g.frozen(p); }

Matrix normal_init(int rows, int cols, double std, std::mt19937_64& rng);

struct Linear {
  Parameter w;
  Parameter b;

  Linear() = default;
  Linear(const std::string& name, int in, int out, double std, std::mt19937_64& rng);
  Var forward(Graph& g, Var x, bool train);
  void collect(std::vector<Parameter*>& out);
};

struct LayerNorm {
  Parameter gain;
  Parameter bias;

  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim);
  Var forward(Graph& g, Var x, bool train);
  void collect(std::vector<Parameter*>& out);
};

/// Pre-norm block: x + Attn(LN(x)), then x + FF(LN(x)) with GELU.
struct TransformerBlock {
  LayerNorm ln1;
  Linear q, k, v, o;
  LayerNorm ln2;
  Linear ff1, ff2;

  TransformerBlock() = default;
  TransformerBlock(const std::string& name, int dim, int ff_dim, std::mt19937_64& rng);
  Var forward(Graph& g, Var x, bool causal, bool train);
  void collect(std::vector<Parameter*>& out);
};

}  // namespace invmix::nn

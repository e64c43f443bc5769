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
#include "invmix/nn.hpp"

#include <cmath>

namespace invmix::nn {

Matrix normal_init(int rows, int cols, double std, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std > 0.0 ? dist(rng) : 0.0;
  return m;
}

Linear::Linear(const std::string& name, int in, int out, double std, std::mt19937_64& rng)
    : w(name + ".w", normal_init(in, out, std, rng)), b(name + ".b", Matrix::Zero(1, out)) {}

Var Linear::forward(Graph& g, Var x, bool train) {
  return g.add_row(g.matmul(x, bind(g, w, train)), bind(g, b, train));
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

LayerNorm::LayerNorm(const std::string& name, int dim)
    : gain(name + ".g", Matrix::Ones(1, dim)), bias(name + ".b", Matrix::Zero(1, dim)) {}

Var LayerNorm::forward(Graph& g, Var x, bool train) {
  return g.layer_norm(x, bind(g, gain, train), bind(g, bias, train));
}

void LayerNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gain);
  out.push_back(&bias);
}

TransformerBlock::TransformerBlock(const std::string& name, int dim, int ff_dim, std::mt19937_64& rng)
    : ln1(name + ".ln1", dim),
      q(name + ".q", dim, dim, 1.0 / std::sqrt(dim), rng),
      k(name + ".k", dim, dim, 1.0 / std::sqrt(dim), rng),
      v(name + ".v", dim, dim, 1.0 / std::sqrt(dim), rng),
      o(name + ".o", dim, dim, 0.5 / std::sqrt(dim), rng),
      ln2(name + ".ln2", dim),
      ff1(name + ".ff1", dim, ff_dim, 1.0 / std::sqrt(dim), rng),
      ff2(name + ".ff2", ff_dim, dim, 0.5 / std::sqrt(ff_dim), rng) {}

Var TransformerBlock::forward(Graph& g, Var x, bool causal, bool train) {
  Var h = ln1.forward(g, x, train);
  Var a = g.attention(q.forward(g, h, train), k.forward(g, h, train), v.forward(g, h, train), causal);
  x = g.add(x, o.forward(g, a, train));
  Var f = ff2.forward(g, g.gelu(ff1.forward(g, ln2.forward(g, x, train), train)), train);
  return g.add(x, f);
}

void TransformerBlock::collect(std::vector<Parameter*>& out) {
  ln1.collect(out);
  q.collect(out);
  k.collect(out);
  v.collect(out);
  o.collect(out);
  ln2.collect(out);
  ff1.collect(out);
  ff2.collect(out);
}

}  // namespace invmix::nn

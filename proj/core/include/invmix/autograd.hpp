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

// Minimal reverse-mode differentiation over dense Eigen matrices.
//
// A Graph is a tape: every op evaluates eagerly and, when any input requires
// a gradient, records a closure that pushes the output gradient back to its
// inputs. Graphs are single-use and cheap; build one per forward pass.

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace invmix::ag {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// A named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix init);

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  bool all_finite() const { return value.allFinite(); }
};

/// Handle to a node in a Graph.
struct Var {
  int id = -1;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf holding a copy of `value`. When `requires_grad`, grad(v) is
  /// populated by backward().
  Var input(Matrix value, bool requires_grad = false);
  /// Leaf bound to a parameter; gradients accumulate into `p.grad`.
  Var param(Parameter& p);
  /// Leaf bound to a parameter that must not receive gradients.
  Var frozen(const Parameter& p);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  double scalar(Var v) const;

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  /// Adds a 1xN row to every row of `a`.
  Var add_row(Var a, Var row);
  Var scale(Var a, double s);
  Var tanh(Var a);
  Var gelu(Var a);
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
  /// Single-head scaled dot-product attention; `causal` masks j > i.
  Var attention(Var q, Var k, Var v, bool causal);
  Var gather_rows(Var table, std::span<const int> ids);
  Var slice_rows(Var a, int start, int count);
  Var concat_rows(std::span<const Var> parts);
  Var mean_rows(Var a);
  /// Views a 1x(rows*cols) row as a rows x cols matrix, row-major.
  Var reshape_row(Var a, int rows, int cols);
  Var sum(Var a);
  Var add_scalar(Var a, Var b);
  /// Sum over rows t of -log softmax(logits.row(t))[targets[t]].
  Var cross_entropy(Var logits, std::span<const int> targets);
  /// Sum over rows t of -sum_k targets(t,k) * log softmax(logits.row(t))[k].
  Var soft_cross_entropy(Var logits, const Matrix& targets);

  /// Back-propagates from a 1x1 node.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* ext = nullptr;
    Matrix grad;
    Parameter* sink = nullptr;
    bool needs_grad = false;
    std::function<void()> back;
  };

  const Matrix& val(int id) const;
  Matrix* grad_target(int id);
  void accumulate(int id, const Matrix& delta);
  int push(Matrix value, bool needs_grad);
  bool any_grad(std::initializer_list<Var> vs) const;

  std::deque<Node> nodes_;  // stable addresses: value() references survive later ops
};

/// Row-wise numerically stable softmax.
Matrix softmax_rows(const Matrix& logits);

/// FNV-1a over the raw bytes of every value, in order. Used to prove that a
/// stage left a parameter set untouched.
std::uint64_t checksum(std::span<const Parameter* const> params);

}  // namespace invmix::ag

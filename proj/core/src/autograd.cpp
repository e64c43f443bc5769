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
#include "invmix/autograd.hpp"

#include "invmix/errors.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <memory>

namespace invmix::ag {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_shape(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + dims(a) + " and " + dims(b));
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

Parameter::Parameter(std::string n, Matrix init)
    : name(std::move(n)), value(std::move(init)), grad(Matrix::Zero(value.rows(), value.cols())) {}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

std::uint64_t checksum(std::span<const Parameter* const> params) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const Parameter* p : params) {
    const auto rows = static_cast<std::int64_t>(p->value.rows());
    const auto cols = static_cast<std::int64_t>(p->value.cols());
    mix(&rows, sizeof rows);
    mix(&cols, sizeof cols);
    mix(p->value.data(), sizeof(double) * static_cast<std::size_t>(p->value.size()));
  }
  return h;
}

// ---------------------------------------------------------------------------

const Matrix& Graph::val(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.ext ? *n.ext : n.value;
}

const Matrix& Graph::value(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ShapeError("Graph::value: invalid handle");
  }
  return val(v.id);
}

const Matrix& Graph::grad(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  if (n.sink) return n.sink->grad;
  return n.grad;
}

double Graph::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw ShapeError("Graph::scalar: node is " + dims(m));
  return m(0, 0);
}

int Graph::push(Matrix value, bool needs_grad) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

bool Graph::any_grad(std::initializer_list<Var> vs) const {
  for (Var v : vs) {
    if (nodes_[static_cast<std::size_t>(v.id)].needs_grad) return true;
  }
  return false;
}

Matrix* Graph::grad_target(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.needs_grad) return nullptr;
  if (n.sink) return &n.sink->grad;
  if (n.grad.size() == 0) {
    const Matrix& v = val(id);
    n.grad.setZero(v.rows(), v.cols());
  }
  return &n.grad;
}

void Graph::accumulate(int id, const Matrix& delta) {
  if (Matrix* g = grad_target(id)) *g += delta;
}

Var Graph::input(Matrix value, bool requires_grad) {
  return Var{push(std::move(value), requires_grad)};
}

Var Graph::param(Parameter& p) {
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
  Node n;
  n.ext = &p.value;
  n.sink = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::frozen(const Parameter& p) {
  Node n;
  n.ext = &p.value;
  n.needs_grad = false;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::matmul(Var a, Var b) {
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  require_shape(A.cols() == B.rows(), "matmul", A, B);
  const bool ng = any_grad({a, b});
  const int out = push(A * B, ng);
  if (ng) {
    nodes_[static_cast<std::size_t>(out)].back = [this, a, b, out] {
      const Matrix& G = nodes_[static_cast<std::size_t>(out)].grad;
      if (nodes_[static_cast<std::size_t>(a.id)].needs_grad) accumulate(a.id, G * val(b.id).transpose());
      if (nodes_[static_cast<std::size_t>(b.id)].needs_grad) accumulate(b.id, val(a.id).transpose() * G);
    };
  }
  return Var{out};
}

Var Graph::add(Var a, Var b) {
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  require_shape(A.rows() == B.rows() && A.cols() == B.cols(), "add", A, B);
  const bool ng = any_grad({a, b});
  const int out = push(A + B, ng);
  if (ng) {
    nodes_[static_cast<std::size_t>(out)].back = [this, a, b, out] {
      const Matrix& G = nodes_[static_cast<std::size_t>(out)].grad;
      accumulate(a.id, G);
      accumulate(b.id, G);
    };
  }
  return Var{out};
}

Var Graph::add_scalar(Var a, Var b) {
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  require_shape(A.size() == 1 && B.size() == 1, "add_scalar", A, B);
  return add(a, b);
}

Var Graph::add_row(Var a, Var row) {
  const Matrix& A = val(a.id);
  const Matrix& R = val(row.id);
  require_shape(R.rows() == 1 && R.cols() == A.cols(), "add_row", A, R);
  const bool ng = any_grad({a, row});
  Matrix out_v = A;
  out_v.rowwise() += R.row(0);
  const int out = push(std::move(out_v), ng);
  if (ng) {
    nodes_[static_cast<std::size_t>(out)].back = [this, a, row, out] {
      const Matrix& G = nodes_[static_cast<std::size_t>(out)].grad;
      accumulate(a.id, G);
      accumulate(row.id, G.colwise().sum());
    };
  }
  return Var{out};
}

Var Graph::scale(Var a, double s) {
  const bool ng = any_grad({a});
  const int out = push(val(a.id) * s, ng);
  if (ng) {
    nodes_[static_cast<std::size_t>(out)].back = [this, a, s, out] {
      accumulate(a.id, nodes_[static_cast<std::size_t>(out)].grad * s);
    };
  }
  return Var{out};
}

Var Graph::tanh(Var a) {
  const bool ng = any_grad({a});
  const int out = push(val(a.id).array().tanh().matrix(), ng);
  if (ng) {
    nodes_[static_cast<std::size_t>(out)].back = [this, a, out] {
      const Node& o = nodes_[static_cast<std::size_t>(out)];
      accumulate(a.id, (o.grad.array() * (1.0 - o.value.array().square())).matrix());
    };
  }
  return Var{out};
}

Var Graph::gelu(Var a) {
  const Matrix& X = val(a.id);
  const Eigen::ArrayXXd x = X.array();
  const Eigen::ArrayXXd t = (kGeluC * (x + 0.044715 * x.cube())).tanh();
  const bool ng = any_grad({a});
  const int out = push((0.5 * x * (1.0 + t)).matrix(), ng);
  if (ng) {
    nodes_[static_cast<std::size_t>(out)].back = [this, a, out, t] {
      const Eigen::ArrayXXd xx = val(a.id).array();
      const Eigen::ArrayXXd d =
          0.5 * (1.0 + t) + 0.5 * xx * (1.0 - t.square()) * kGeluC * (1.0 + 3.0 * 0.044715 * xx.square());
      accumulate(a.id, (nodes_[static_cast<std::size_t>(out)].grad.array() * d).matrix());
    };
  }
  return Var{out};
}

Var Graph::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& X = val(x.id);
  const Matrix& Gn = val(gain.id);
  const Matrix& Bs = val(bias.id);
  require_shape(Gn.rows() == 1 && Gn.cols() == X.cols(), "layer_norm(gain)", X, Gn);
  require_shape(Bs.rows() == 1 && Bs.cols() == X.cols(), "layer_norm(bias)", X, Bs);
  const Eigen::Index n = X.rows();
  const double d = static_cast<double>(X.cols());
  Matrix xhat(X.rows(), X.cols());
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = X.row(r).mean();
    const double var = (X.row(r).array() - mu).square().sum() / d;
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (X.row(r).array() - mu) * inv_std(r);
  }
  Matrix y = xhat.array().rowwise() * Gn.row(0).array();
  y.rowwise() += Bs.row(0);
  const bool ng = any_grad({x, gain, bias});
  const int out = push(std::move(y), ng);
  if (ng) {
    nodes_[static_cast<std::size_t>(out)].back = [this, x, gain, bias, out, xhat, inv_std, d] {
      const Matrix& G = nodes_[static_cast<std::size_t>(out)].grad;
      if (nodes_[static_cast<std::size_t>(gain.id)].needs_grad)
        accumulate(gain.id, (G.array() * xhat.array()).colwise().sum().matrix());
      if (nodes_[static_cast<std::size_t>(bias.id)].needs_grad) accumulate(bias.id, G.colwise().sum());
      if (nodes_[static_cast<std::size_t>(x.id)].needs_grad) {
        const Matrix dxhat = G.array().rowwise() * val(gain.id).row(0).array();
        Matrix dx(G.rows(), G.cols());
        for (Eigen::Index r = 0; r < G.rows(); ++r) {
          const double m1 = dxhat.row(r).sum() / d;
          const double m2 = (dxhat.row(r).array() * xhat.row(r).array()).sum() / d;
          dx.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
        }
        accumulate(x.id, dx);
      }
    };
  }
  return Var{out};
}

Var Graph::attention(Var q, Var k, Var v, bool causal) {
  const Matrix& Q = val(q.id);
  const Matrix& K = val(k.id);
  const Matrix& V = val(v.id);
  require_shape(Q.cols() == K.cols(), "attention(q,k)", Q, K);
  require_shape(K.rows() == V.rows(), "attention(k,v)", K, V);
  if (causal) require_shape(Q.rows() == K.rows(), "attention(causal)", Q, K);
  const double s = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
  Matrix S = (Q * K.transpose()) * s;
  if (causal) {
    for (Eigen::Index i = 0; i < S.rows(); ++i)
      for (Eigen::Index j = i + 1; j < S.cols(); ++j) S(i, j) = -std::numeric_limits<double>::infinity();
  }
  auto P = std::make_shared<Matrix>(softmax_rows(S));
  const bool ng = any_grad({q, k, v});
  const int out = push((*P) * V, ng);
  if (ng) {
    nodes_[static_cast<std::size_t>(out)].back = [this, q, k, v, out, P, s] {
      const Matrix& G = nodes_[static_cast<std::size_t>(out)].grad;
      if (nodes_[static_cast<std::size_t>(v.id)].needs_grad) accumulate(v.id, P->transpose() * G);
      const Matrix dP = G * val(v.id).transpose();
      const Eigen::VectorXd rs = (dP.array() * P->array()).rowwise().sum();
      Matrix dS = P->array() * (dP.array().colwise() - rs.array());
      dS *= s;
      if (nodes_[static_cast<std::size_t>(q.id)].needs_grad) accumulate(q.id, dS * val(k.id));
      if (nodes_[static_cast<std::size_t>(k.id)].needs_grad) accumulate(k.id, dS.transpose() * val(q.id));
    };
  }
  return Var{out};
}

Var Graph::gather_rows(Var table, std::span<const int> ids) {
  const Matrix& T = val(table.id);
  Matrix out_v(static_cast<Eigen::Index>(ids.size()), T.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= T.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(ids[i]) + " out of range for " + dims(T));
    }
    out_v.row(static_cast<Eigen::Index>(i)) = T.row(ids[i]);
  }
  const bool ng = any_grad({table});
  const int out = push(std::move(out_v), ng);
  if (ng) {
    std::vector<int> idx(ids.begin(), ids.end());
    nodes_[static_cast<std::size_t>(out)].back = [this, table, out, idx = std::move(idx)] {
      const Matrix& G = nodes_[static_cast<std::size_t>(out)].grad;
      Matrix* tg = grad_target(table.id);
      if (!tg) return;
      for (std::size_t i = 0; i < idx.size(); ++i) tg->row(idx[i]) += G.row(static_cast<Eigen::Index>(i));
    };
  }
  return Var{out};
}

Var Graph::slice_rows(Var a, int start, int count) {
  const Matrix& A = val(a.id);
  if (start < 0 || count < 0 || start + count > A.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(start) + ", +" + std::to_string(count) +
                     ") out of range for " + dims(A));
  }
  const bool ng = any_grad({a});
  const int out = push(A.middleRows(start, count), ng);
  if (ng) {
    nodes_[static_cast<std::size_t>(out)].back = [this, a, out, start, count] {
      Matrix* ag = grad_target(a.id);
      if (ag) ag->middleRows(start, count) += nodes_[static_cast<std::size_t>(out)].grad;
    };
  }
  return Var{out};
}

Var Graph::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Eigen::Index cols = val(parts[0].id).cols();
  Eigen::Index rows = 0;
  bool ng = false;
  for (Var p : parts) {
    const Matrix& m = val(p.id);
    require_shape(m.cols() == cols, "concat_rows", val(parts[0].id), m);
    rows += m.rows();
    ng = ng || nodes_[static_cast<std::size_t>(p.id)].needs_grad;
  }
  Matrix out_v(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    const Matrix& m = val(p.id);
    out_v.middleRows(at, m.rows()) = m;
    at += m.rows();
  }
  const int out = push(std::move(out_v), ng);
  if (ng) {
    std::vector<Var> ps(parts.begin(), parts.end());
    nodes_[static_cast<std::size_t>(out)].back = [this, out, ps = std::move(ps)] {
      const Matrix& G = nodes_[static_cast<std::size_t>(out)].grad;
      Eigen::Index off = 0;
      for (Var p : ps) {
        const Eigen::Index r = val(p.id).rows();
        if (Matrix* pg = grad_target(p.id)) *pg += G.middleRows(off, r);
        off += r;
      }
    };
  }
  return Var{out};
}

Var Graph::mean_rows(Var a) {
  const Matrix& A = val(a.id);
  if (A.rows() == 0) throw ShapeError("mean_rows: empty input");
  const bool ng = any_grad({a});
  const int out = push(A.colwise().mean(), ng);
  if (ng) {
    nodes_[static_cast<std::size_t>(out)].back = [this, a, out] {
      const Matrix& G = nodes_[static_cast<std::size_t>(out)].grad;
      const Eigen::Index n = val(a.id).rows();
      accumulate(a.id, G.replicate(n, 1) / static_cast<double>(n));
    };
  }
  return Var{out};
}

Var Graph::reshape_row(Var a, int rows, int cols) {
  const Matrix& A = val(a.id);
  if (A.rows() != 1 || A.cols() != static_cast<Eigen::Index>(rows) * cols) {
    throw ShapeError("reshape_row: cannot view " + dims(A) + " as " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  Matrix out_v(rows, cols);
  for (int r = 0; r < rows; ++r) out_v.row(r) = A.block(0, static_cast<Eigen::Index>(r) * cols, 1, cols);
  const bool ng = any_grad({a});
  const int out = push(std::move(out_v), ng);
  if (ng) {
    nodes_[static_cast<std::size_t>(out)].back = [this, a, out, rows, cols] {
      const Matrix& G = nodes_[static_cast<std::size_t>(out)].grad;
      Matrix flat(1, static_cast<Eigen::Index>(rows) * cols);
      for (int r = 0; r < rows; ++r) flat.block(0, static_cast<Eigen::Index>(r) * cols, 1, cols) = G.row(r);
      accumulate(a.id, flat);
    };
  }
  return Var{out};
}

Var Graph::sum(Var a) {
  const bool ng = any_grad({a});
  Matrix s(1, 1);
  s(0, 0) = val(a.id).sum();
  const int out = push(std::move(s), ng);
  if (ng) {
    nodes_[static_cast<std::size_t>(out)].back = [this, a, out] {
      const double g = nodes_[static_cast<std::size_t>(out)].grad(0, 0);
      const Matrix& A = val(a.id);
      accumulate(a.id, Matrix::Constant(A.rows(), A.cols(), g));
    };
  }
  return Var{out};
}

Var Graph::cross_entropy(Var logits, std::span<const int> targets) {
  const Matrix& L = val(logits.id);
  if (static_cast<Eigen::Index>(targets.size()) != L.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " + dims(L));
  }
  auto P = std::make_shared<Matrix>(softmax_rows(L));
  double loss = 0.0;
  for (Eigen::Index r = 0; r < L.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= L.cols()) throw ShapeError("cross_entropy: target out of range");
    const double mx = L.row(r).maxCoeff();
    const double lse = mx + std::log((L.row(r).array() - mx).exp().sum());
    loss += lse - L(r, t);
  }
  const bool ng = any_grad({logits});
  Matrix s(1, 1);
  s(0, 0) = loss;
  const int out = push(std::move(s), ng);
  if (ng) {
    std::vector<int> tg(targets.begin(), targets.end());
    nodes_[static_cast<std::size_t>(out)].back = [this, logits, out, P, tg = std::move(tg)] {
      const double g = nodes_[static_cast<std::size_t>(out)].grad(0, 0);
      Matrix d = *P;
      for (std::size_t r = 0; r < tg.size(); ++r) d(static_cast<Eigen::Index>(r), tg[r]) -= 1.0;
      accumulate(logits.id, d * g);
    };
  }
  return Var{out};
}

Var Graph::soft_cross_entropy(Var logits, const Matrix& targets) {
  const Matrix& L = val(logits.id);
  require_shape(L.rows() == targets.rows() && L.cols() == targets.cols(), "soft_cross_entropy", L, targets);
  auto P = std::make_shared<Matrix>(softmax_rows(L));
  double loss = 0.0;
  for (Eigen::Index r = 0; r < L.rows(); ++r) {
    const double mx = L.row(r).maxCoeff();
    const double lse = mx + std::log((L.row(r).array() - mx).exp().sum());
    for (Eigen::Index k = 0; k < L.cols(); ++k) {
      if (targets(r, k) != 0.0) loss -= targets(r, k) * (L(r, k) - lse);
    }
  }
  const bool ng = any_grad({logits});
  Matrix s(1, 1);
  s(0, 0) = loss;
  const int out = push(std::move(s), ng);
  if (ng) {
    nodes_[static_cast<std::size_t>(out)].back = [this, logits, out, P, targets] {
      const double g = nodes_[static_cast<std::size_t>(out)].grad(0, 0);
      // d/dz of -sum_k y_k log p_k is p * sum(y) - y.
      Matrix d = P->array().colwise() * targets.rowwise().sum().array();
      d -= targets;
      accumulate(logits.id, d * g);
    };
  }
  return Var{out};
}

void Graph::backward(Var loss) {
  Node& root = nodes_.at(static_cast<std::size_t>(loss.id));
  const Matrix& lv = val(loss.id);
  if (lv.size() != 1) throw ShapeError("backward: loss must be 1x1, got " + dims(lv));
  if (!root.needs_grad) return;
  if (Matrix* g = grad_target(loss.id)) (*g)(0, 0) += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.back && n.grad.size() != 0) n.back();
  }
}

}  // namespace invmix::ag

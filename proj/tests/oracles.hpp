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

// Independent reference implementations, written term by term and kept
// apart from the library code they check.

#include "invmix/adaptor.hpp"
#include "invmix/encoder.hpp"
#include "invmix/tiny_decoder.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace invmix::oracle {

// Literal softmax: exponentiate, then normalise, in plain loops.
inline std::vector<double> softmax_oracle(const Logits& z) {
  std::vector<double> e;
  double s = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) s += e.emplace_back(std::exp(z(k)));
  for (auto& v : e) v /= s;
  return e;
}

// Cross-entropy written term by term: -sum_k y_k log p_k.
inline double ce_oracle(const Logits& z, const std::vector<double>& y) {
  const auto p = softmax_oracle(z);
  double loss = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (y[k] != 0.0) loss -= y[k] * std::log(p[k]);
  }
  return loss;
}

// Per-step oracle: one independent forward pass per target position over the
// gold prefix, summing -log softmax of the next gold id.
inline double stepwise_nll(const TinyDecoder& dec, const SoftPrompt& p) {
  double total = 0.0;
  for (std::size_t t = 0; t < p.target_tokens.size(); ++t) {
    const std::vector<int> tail(p.target_tokens.begin(), p.target_tokens.begin() + static_cast<std::ptrdiff_t>(t));
    const ag::Matrix logits = dec.sequence_logits(p, tail);
    const Eigen::RowVectorXd last = logits.row(logits.rows() - 1);
    double z = 0.0;
    for (Eigen::Index k = 0; k < last.size(); ++k) z += std::exp(last(k));
    total -= std::log(std::exp(last(p.target_tokens[t])) / z);
  }
  return total;
}

// Exhaustive sign-flip oracle. Average ranks are counted directly; the
// two-sided p is the null probability of a statistic at least as far from
// its mean as the observed one.
inline double signflip_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  const std::size_t n = d.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++below;
      if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    rank[i] = below + (equal + 1) / 2;
  }
  double total = 0, t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += rank[i];
    if (d[i] > 0) t += rank[i];
  }
  const double centre = total / 2;
  const double observed = std::abs(t - centre);
  std::uint64_t extreme = 0;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1ULL) s += rank[i];
    extreme += std::abs(s - centre) >= observed - 1e-9;
  }
  return static_cast<double>(extreme) / static_cast<double>(1ULL << n);
}

}  // namespace invmix::oracle

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
#include "invmix/backend.hpp"

#include "invmix/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace invmix {

std::string_view to_string(Capability c) {
  switch (c) {
    case Capability::teacher_forced_logprob: return "teacher_forced_logprob";
    case Capability::sample: return "sample";
    case Capability::greedy: return "greedy";
    case Capability::embedding_injection: return "embedding_injection";
    case Capability::text_completion: return "text_completion";
  }
  return "?";
}

std::string_view to_string(DecodeConfig::Mode m) { return m == DecodeConfig::Mode::greedy ? "greedy" : "sample"; }

DecodeConfig::Mode decode_mode_from_string(std::string_view s) {
  if (s == "greedy") return DecodeConfig::Mode::greedy;
  if (s == "sample") return DecodeConfig::Mode::sample;
  throw DomainError("unknown decode mode '" + std::string(s) + "'");
}

void DecoderBackend::unsupported(Capability c, std::string_view hint) const {
  std::string msg = "backend '" + id() + "' lacks capability " + std::string(to_string(c));
  if (!hint.empty()) msg += ": " + std::string(hint);
  throw CapabilityError(msg);
}

const Vocabulary& DecoderBackend::vocabulary() const {
  unsupported(Capability::embedding_injection, "no local vocabulary");
}

ag::Var DecoderBackend::teacher_forced_nll(ag::Graph&, const SoftPrompt&, ag::Var) const {
  unsupported(Capability::teacher_forced_logprob,
              "training needs token log-probabilities; use a local backend with embedding injection");
}

std::vector<double> DecoderBackend::target_logprobs(const SoftPrompt&) const {
  unsupported(Capability::teacher_forced_logprob,
              "training needs token log-probabilities; use a local backend with embedding injection");
}

std::vector<int> DecoderBackend::generate(const SoftPrompt&, const DecodeConfig&, std::mt19937_64&) const {
  unsupported(Capability::embedding_injection, "soft-token decoding needs a backend that accepts input embeddings");
}

std::string DecoderBackend::complete(const std::vector<std::string>&, const DecodeConfig&) const {
  unsupported(Capability::text_completion, "");
}

int choose_token(const Eigen::RowVectorXd& logits, const DecodeConfig& cfg, std::mt19937_64& rng) {
  if (logits.size() == 0) throw ShapeError("choose_token: empty logits");
  if (cfg.mode == DecodeConfig::Mode::greedy || cfg.temperature <= 0.0) {
    Eigen::Index arg = 0;
    logits.maxCoeff(&arg);
    return static_cast<int>(arg);
  }
  const Eigen::RowVectorXd scaled = logits / cfg.temperature;
  const double mx = scaled.maxCoeff();
  Eigen::RowVectorXd p = (scaled.array() - mx).exp();
  p /= p.sum();

  std::vector<int> order(static_cast<std::size_t>(p.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&p](int a, int b) { return p(a) > p(b); });
  const double top_p = std::clamp(cfg.top_p, 0.0, 1.0);
  double mass = 0.0;
  std::size_t keep = 0;
  while (keep < order.size()) {
    mass += p(order[keep]);
    ++keep;
    if (mass >= top_p) break;
  }
  std::uniform_real_distribution<double> u(0.0, mass);
  double r = u(rng);
  for (std::size_t i = 0; i < keep; ++i) {
    r -= p(order[i]);
    if (r <= 0.0) return order[i];
  }
  return order[keep - 1];
}

}  // namespace invmix

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

// Frozen generative backends. A backend either accepts soft tokens injected
// into its input-embedding sequence (local models) or plain text prompts
// (remote chat APIs, rule-based judges), as advertised by capabilities().

#include "invmix/autograd.hpp"
#include "invmix/tokenizer.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace invmix {

enum class Capability : unsigned {
  teacher_forced_logprob = 1u << 0,
  sample = 1u << 1,
  greedy = 1u << 2,
  embedding_injection = 1u << 3,
  text_completion = 1u << 4,
};

constexpr unsigned operator|(Capability a, Capability b) { return static_cast<unsigned>(a) | static_cast<unsigned>(b); }
constexpr unsigned operator|(unsigned a, Capability b) { return a | static_cast<unsigned>(b); }

std::string_view to_string(Capability c);

struct DecodeConfig {
  enum class Mode { greedy, sample };
  Mode mode = Mode::sample;
  double temperature = 1.0;
  double top_p = 0.9;
  int max_new_tokens = 64;
};

std::string_view to_string(DecodeConfig::Mode m);
DecodeConfig::Mode decode_mode_from_string(std::string_view s);

/// Prompt with a continuous slot: prefix ids, soft vectors, suffix ids and,
/// for training, the target ids (sentence, closing text, then <eos>).
struct SoftPrompt {
  std::vector<int> prefix_tokens;
  ag::Matrix soft_vectors;  // n_soft_tokens x decoder_input_dim
  std::vector<int> suffix_tokens;
  std::vector<int> target_tokens;
  /// Ids of the template text after the target marker; stripped from output.
  std::vector<int> closing_tokens;
  int slot_position = 0;
  bool truncated = false;

  int slot_length() const { return static_cast<int>(soft_vectors.rows()); }
  int context_length() const {
    return static_cast<int>(prefix_tokens.size() + suffix_tokens.size() + target_tokens.size()) + slot_length();
  }
};

class DecoderBackend {
 public:
  virtual ~DecoderBackend() = default;

  virtual std::string id() const = 0;
  virtual unsigned capabilities() const = 0;
  bool has(Capability c) const { return (capabilities() & static_cast<unsigned>(c)) != 0; }

  /// Width of an injected soft token; 0 when unsupported.
  virtual int input_dim() const { return 0; }
  virtual int max_context() const { return 0; }
  virtual const Vocabulary& vocabulary() const;

  /// Teacher-forced negative log-likelihood of the prompt's target tokens,
  /// with `soft` (slot_length x input_dim) as a graph node so gradients
  /// reach whatever produced it. Backend weights stay constant.
  virtual ag::Var teacher_forced_nll(ag::Graph& g, const SoftPrompt& prompt, ag::Var soft) const;

  /// Per-target-position log-probabilities (no gradient).
  virtual std::vector<double> target_logprobs(const SoftPrompt& prompt) const;

  /// Continues the prompt; returns generated ids without the <eos>.
  virtual std::vector<int> generate(const SoftPrompt& prompt, const DecodeConfig& cfg, std::mt19937_64& rng) const;

  /// Plain-text completion for chat-style backends.
  virtual std::string complete(const std::vector<std::string>& prompt_parts, const DecodeConfig& cfg) const;

  /// Checksum over the backend's weights; constant for remote backends.
  virtual std::uint64_t parameter_checksum() const { return 0; }

 protected:
  [[noreturn]] void unsupported(Capability c, std::string_view hint) const;
};

/// Picks a token id from a row of logits (greedy, or temperature + nucleus).
int choose_token(const Eigen::RowVectorXd& logits, const DecodeConfig& cfg, std::mt19937_64& rng);

}  // namespace invmix

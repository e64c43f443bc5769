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

// The adaptor maps a task embedding to soft tokens in the decoder's input
// space. Together with the inversion prompt it yields the generation loss
// used for alignment, and decodes (possibly mixed) embeddings to sentences.

#include "invmix/autograd.hpp"
#include "invmix/backend.hpp"
#include "invmix/encoder.hpp"
#include "invmix/prompts.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>

namespace invmix {

struct AdaptorConfig {
  int embed_dim = 64;
  int decoder_input_dim = 64;
  int n_soft_tokens = 1;
  double init_std = 0.02;
  bool bias = true;
  std::uint64_t seed = 0;
};

/// Single affine layer: embed_dim -> n_soft_tokens * decoder_input_dim.
class Adaptor {
 public:
  Adaptor() = default;
  explicit Adaptor(AdaptorConfig cfg);

  /// n_soft_tokens x decoder_input_dim.
  ag::Matrix adapt(const Embedding& h) const;
  ag::Var adapt(ag::Graph& g, ag::Var h, bool train);

  std::vector<ag::Parameter*> parameters();
  std::vector<const ag::Parameter*> parameters() const;
  std::uint64_t checksum() const;
  const AdaptorConfig& config() const noexcept { return cfg_; }
  ag::Parameter& weight() { return weight_; }
  ag::Parameter& bias() { return bias_; }

  /// Checkpoint carries weights, dims, the template name and the backend id
  /// the adaptor was aligned against.
  void save(const std::filesystem::path& path, const std::string& template_name, const std::string& backend_id) const;
  struct Loaded;
  static Loaded load(const std::filesystem::path& path);

 private:
  AdaptorConfig cfg_;
  ag::Parameter weight_;
  ag::Parameter bias_;
};

struct Adaptor::Loaded {
  Adaptor adaptor;
  std::string template_name;
  std::string backend_id;
};

/// Tokenises the template around the slot. With a target, target_tokens is
/// the sentence, then the template's closing text, then <eos>, truncated
/// (and flagged) to fit `max_context`.
SoftPrompt build_prompt(const PromptTemplate& tmpl, const Vocabulary& vocab, ag::Matrix soft_vectors,
                        const std::optional<std::string>& target = std::nullopt, int max_context = 0);

/// -log P(target | prompt) summed over target positions only.
double gen_loss(const SoftPrompt& prompt, const DecoderBackend& backend);
ag::Var gen_loss(ag::Graph& g, const SoftPrompt& prompt, ag::Var soft, const DecoderBackend& backend);

/// Full differentiable path text -> h -> soft tokens -> loss. `train_theta`
/// and `train_phi` choose which side receives gradients.
ag::Var gen_loss(ag::Graph& g, std::string_view text, TaskModel& theta, bool train_theta, Adaptor& phi,
                 bool train_phi, const DecoderBackend& backend, const PromptTemplate& tmpl);

/// Decodes an embedding to a sentence through the adaptor and backend.
/// Throws GenerationError when nothing but template text is produced.
std::string invert(const Embedding& h, const Adaptor& phi, const DecoderBackend& backend, const PromptTemplate& tmpl,
                   const DecodeConfig& decode, std::mt19937_64& rng);

}  // namespace invmix

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

// Local word-level autoregressive transformer. It stands in for the frozen
// generative model: it accepts soft tokens in its input sequence, exposes
// teacher-forced log-probabilities with gradients w.r.t. those soft tokens,
// and never updates its own weights outside pretrain_decoder().

#include "invmix/backend.hpp"
#include "invmix/encoder.hpp"
#include "invmix/nn.hpp"
#include "invmix/optim.hpp"
#include "invmix/prompts.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace invmix {

struct DecoderConfig {
  int dim = 64;
  int layers = 2;
  int ff_dim = 128;
  int max_ctx = 64;
  std::uint64_t seed = 0;
};

class TinyDecoder final : public DecoderBackend {
 public:
  TinyDecoder() = default;
  TinyDecoder(DecoderConfig cfg, Vocabulary vocab, std::string name = "tiny-decoder");

  std::string id() const override { return name_; }
  unsigned capabilities() const override;
  int input_dim() const override { return cfg_.dim; }
  int max_context() const override { return cfg_.max_ctx; }
  const Vocabulary& vocabulary() const override { return vocab_; }

  ag::Var teacher_forced_nll(ag::Graph& g, const SoftPrompt& prompt, ag::Var soft) const override;
  std::vector<double> target_logprobs(const SoftPrompt& prompt) const override;
  std::vector<int> generate(const SoftPrompt& prompt, const DecodeConfig& cfg, std::mt19937_64& rng) const override;
  std::uint64_t parameter_checksum() const override;

  /// Next-token logits for every position of an explicit sequence
  /// (prefix, soft rows, then `tail` ids). Inference only.
  ag::Matrix sequence_logits(const SoftPrompt& prompt, std::span<const int> tail) const;

  const DecoderConfig& config() const noexcept { return cfg_; }
  std::vector<ag::Parameter*> parameters();

  void save(const std::filesystem::path& path) const;
  static TinyDecoder load(const std::filesystem::path& path);

 private:
  friend struct DecoderPretrainer;

  ag::Var forward_logits(ag::Graph& g, const SoftPrompt& prompt, ag::Var soft, std::span<const int> tail,
                         bool train) const;
  ag::Var nll(ag::Graph& g, const SoftPrompt& prompt, ag::Var soft, bool train) const;

  DecoderConfig cfg_;
  Vocabulary vocab_;
  std::string name_ = "tiny-decoder";
  // mutable: pretraining binds them as trainable through the const path.
  mutable ag::Parameter tok_emb_;
  mutable ag::Parameter pos_emb_;
  mutable std::vector<nn::TransformerBlock> blocks_;
  mutable nn::LayerNorm final_ln_;
  mutable nn::Linear out_;
};

/// Settings for giving the local decoder its generative ability. A throwaway
/// conditioning encoder fills the soft slot during pretraining so the decoder
/// learns to read a sentence code; with probability `partial_prob` the
/// conditioner only sees a random subset of the words (each dropped with
/// `word_drop`), which teaches the decoder to complete partial codes.
struct DecoderPretrainConfig {
  int epochs = 60;
  int batch_size = 8;
  AdamConfig adam{3e-3, 0.9, 0.999, 1e-8, 1.0};
  double partial_prob = 0.3;
  double word_drop = 0.3;
  double noise_std = 0.0;
  int conditioner_dim = 64;
  std::uint64_t seed = 0;
};

struct PretrainReport {
  std::vector<double> epoch_loss;
};

PretrainReport pretrain_decoder(TinyDecoder& decoder, std::span<const std::string> sentences,
                                const PromptTemplate& tmpl, const DecoderPretrainConfig& cfg);

}  // namespace invmix

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

// The task-specific model: a small transformer sentence encoder producing a
// fixed-size embedding, plus an MLP classification head over K classes.

#include "invmix/autograd.hpp"
#include "invmix/datamodel.hpp"
#include "invmix/nn.hpp"
#include "invmix/optim.hpp"
#include "invmix/tokenizer.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace invmix {

using Embedding = Eigen::RowVectorXd;
using Logits = Eigen::RowVectorXd;

enum class Pooling { cls, mean };

std::string_view to_string(Pooling p);
Pooling pooling_from_string(std::string_view s);

struct EncoderConfig {
  int embed_dim = 64;
  int layers = 1;
  int ff_dim = 128;
  /// Maximum number of word tokens; longer inputs are truncated and flagged.
  int max_len = 32;
  Pooling pooling = Pooling::cls;
  std::uint64_t seed = 0;
};

/// Token + position embeddings, bidirectional transformer blocks, final
/// LayerNorm, then first-token ([CLS]) or mean pooling.
class SentenceEncoder {
 public:
  SentenceEncoder() = default;
  SentenceEncoder(EncoderConfig cfg, int vocab_size, const std::string& prefix = "enc");

  /// `ids` are word ids without [CLS]; truncated to max_len.
  ag::Var forward(ag::Graph& g, std::span<const int> ids, bool train, bool* truncated = nullptr);
  void collect(std::vector<ag::Parameter*>& out);
  const EncoderConfig& config() const noexcept { return cfg_; }

 private:
  EncoderConfig cfg_;
  ag::Parameter tok_emb_;
  ag::Parameter pos_emb_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm final_ln_;
};

struct TrainLog {
  std::vector<double> epoch_loss;
};

struct Encoded {
  Embedding h;
  bool truncated = false;
};

/// M_theta with head f: encoder parameters and a one-hidden-layer tanh MLP.
class TaskModel {
 public:
  TaskModel() = default;
  TaskModel(EncoderConfig cfg, Vocabulary vocab, LabelSpace labels, int head_hidden = 64);
  TaskModel(const TaskModel& other);
  TaskModel& operator=(const TaskModel& other);

  /// Inference-mode embedding; deterministic for fixed parameters.
  Encoded encode(std::string_view text) const;
  Embedding embed(std::string_view text) const { return encode(text).h; }
  /// Graph-mode embedding (1 x embed_dim).
  ag::Var embed(ag::Graph& g, std::string_view text, bool train);

  Logits classify(const Embedding& h) const;
  ag::Var classify(ag::Graph& g, ag::Var h, bool train);
  int predict(std::string_view text) const;

  std::vector<ag::Parameter*> parameters();
  std::vector<const ag::Parameter*> parameters() const;
  std::vector<ag::Parameter*> head_parameters();
  std::uint64_t checksum() const;

  int embed_dim() const noexcept { return cfg_.embed_dim; }
  int num_classes() const noexcept { return labels_.size(); }
  const EncoderConfig& config() const noexcept { return cfg_; }
  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  const LabelSpace& labels() const noexcept { return labels_; }
  int head_hidden() const noexcept { return head_hidden_; }
  /// Number of inputs truncated since construction.
  long truncation_count() const noexcept { return truncations_.load(); }

  void save(const std::filesystem::path& path) const;
  static TaskModel load(const std::filesystem::path& path);

 private:
  EncoderConfig cfg_;
  Vocabulary vocab_;
  LabelSpace labels_;
  int head_hidden_ = 64;
  SentenceEncoder encoder_;
  nn::Linear head_hidden_layer_;
  nn::Linear head_out_;
  mutable std::atomic<long> truncations_{0};
};

// --- losses -----------------------------------------------------------------

Eigen::RowVectorXd softmax(const Logits& logits);

/// Cross-entropy against a one-hot target; rejects anything else.
double cls_loss(const Logits& logits, std::span<const double> onehot);
/// Cross-entropy against a soft target distribution.
double cls_loss(const Logits& logits, const SoftLabel& target);
/// d loss / d logits = softmax(logits) * sum(target) - target.
Eigen::RowVectorXd cls_loss_grad(const Logits& logits, std::span<const double> target);

// --- training ---------------------------------------------------------------

/// A sentence with the target distribution it is trained toward.
struct TrainingItem {
  std::string text;
  std::vector<double> target;
};

enum class LabelMode { soft, hard };

/// One-hot items for a task corpus; soft or hard targets for an augmented one.
/// In hard mode samples without a hard label are skipped.
std::vector<TrainingItem> training_items(const Corpus& corpus, LabelMode mode = LabelMode::soft);

struct ClassifierSchedule {
  int epochs = 10;
  int batch_size = 8;
  AdamConfig adam{};
  std::uint64_t seed = 0;
};

/// Minimises summed cross-entropy over `items`, updating encoder and head.
/// Shuffles per epoch under the schedule seed. Throws TrainingError on a
/// non-finite loss.
TrainLog train_classifier(TaskModel& model, std::span<const TrainingItem> items, const ClassifierSchedule& schedule);

double training_accuracy(const TaskModel& model, std::span<const TrainingItem> items);

}  // namespace invmix

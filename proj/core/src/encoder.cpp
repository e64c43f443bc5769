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
#include "invmix/encoder.hpp"

#include "checkpoint.hpp"
#include "invmix/errors.hpp"
#include "invmix/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace invmix {

using nlohmann::json;

std::string_view to_string(Pooling p) { return p == Pooling::cls ? "cls" : "mean"; }

Pooling pooling_from_string(std::string_view s) {
  if (s == "cls") return Pooling::cls;
  if (s == "mean") return Pooling::mean;
  throw DomainError("unknown pooling '" + std::string(s) + "'");
}

// --- SentenceEncoder ----------------------------------------------------------

SentenceEncoder::SentenceEncoder(EncoderConfig cfg, int vocab_size, const std::string& prefix) : cfg_(cfg) {
  if (cfg_.embed_dim <= 0 || cfg_.layers < 0 || cfg_.ff_dim <= 0 || cfg_.max_len <= 0) {
    throw DomainError("encoder dimensions must be positive");
  }
  std::mt19937_64 rng(cfg_.seed);
  tok_emb_ = ag::Parameter(prefix + ".tok", nn::normal_init(vocab_size, cfg_.embed_dim, 1.0, rng));
  pos_emb_ = ag::Parameter(prefix + ".pos", nn::normal_init(cfg_.max_len + 1, cfg_.embed_dim, 0.1, rng));
  for (int l = 0; l < cfg_.layers; ++l)
    blocks_.emplace_back(prefix + ".block" + std::to_string(l), cfg_.embed_dim, cfg_.ff_dim, rng);
  final_ln_ = nn::LayerNorm(prefix + ".ln_f", cfg_.embed_dim);
}

ag::Var SentenceEncoder::forward(ag::Graph& g, std::span<const int> ids, bool train, bool* truncated) {
  const std::size_t n_words = std::min(ids.size(), static_cast<std::size_t>(cfg_.max_len));
  if (truncated) *truncated = ids.size() > n_words;
  std::vector<int> seq;
  seq.reserve(n_words + 1);
  seq.push_back(Vocabulary::kCls);
  seq.insert(seq.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_words));
  const int n = static_cast<int>(seq.size());

  ag::Var x = g.gather_rows(nn::bind(g, tok_emb_, train), seq);
  x = g.add(x, g.slice_rows(nn::bind(g, pos_emb_, train), 0, n));
  for (auto& b : blocks_) x = b.forward(g, x, /*causal=*/false, train);
  x = final_ln_.forward(g, x, train);
  if (cfg_.pooling == Pooling::cls || n == 1) return g.slice_rows(x, 0, 1);
  return g.mean_rows(g.slice_rows(x, 1, n - 1));
}

void SentenceEncoder::collect(std::vector<ag::Parameter*>& out) {
  out.push_back(&tok_emb_);
  out.push_back(&pos_emb_);
  for (auto& b : blocks_) b.collect(out);
  final_ln_.collect(out);
}

// --- TaskModel ----------------------------------------------------------------

TaskModel::TaskModel(EncoderConfig cfg, Vocabulary vocab, LabelSpace labels, int head_hidden)
    : cfg_(cfg), vocab_(std::move(vocab)), labels_(std::move(labels)), head_hidden_(head_hidden) {
  if (head_hidden_ <= 0) throw DomainError("head_hidden must be positive");
  encoder_ = SentenceEncoder(cfg_, vocab_.size(), "enc");
  std::mt19937_64 rng(cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
  head_hidden_layer_ = nn::Linear("head.hidden", cfg_.embed_dim, head_hidden_, 1.0 / std::sqrt(cfg_.embed_dim), rng);
  head_out_ = nn::Linear("head.out", head_hidden_, labels_.size(), 1.0 / std::sqrt(head_hidden_), rng);
}

TaskModel::TaskModel(const TaskModel& other)
    : cfg_(other.cfg_),
      vocab_(other.vocab_),
      labels_(other.labels_),
      head_hidden_(other.head_hidden_),
      encoder_(other.encoder_),
      head_hidden_layer_(other.head_hidden_layer_),
      head_out_(other.head_out_),
      truncations_(other.truncations_.load()) {}

TaskModel& TaskModel::operator=(const TaskModel& other) {
  if (this != &other) {
    cfg_ = other.cfg_;
    vocab_ = other.vocab_;
    labels_ = other.labels_;
    head_hidden_ = other.head_hidden_;
    encoder_ = other.encoder_;
    head_hidden_layer_ = other.head_hidden_layer_;
    head_out_ = other.head_out_;
    truncations_.store(other.truncations_.load());
  }
  return *this;
}

ag::Var TaskModel::embed(ag::Graph& g, std::string_view text, bool train) {
  const std::vector<int> ids = vocab_.encode(text);
  if (ids.empty()) throw DomainError("cannot embed empty text");
  bool truncated = false;
  ag::Var h = encoder_.forward(g, ids, train, &truncated);
  if (truncated) truncations_.fetch_add(1);
  return h;
}

Encoded TaskModel::encode(std::string_view text) const {
  ag::Graph g;
  const std::vector<int> ids = vocab_.encode(text);
  if (ids.empty()) throw DomainError("cannot embed empty text");
  bool truncated = false;
  // Inference binds every parameter frozen, so nothing is written.
  ag::Var h = const_cast<SentenceEncoder&>(encoder_).forward(g, ids, false, &truncated);
  if (truncated) truncations_.fetch_add(1);
  return Encoded{g.value(h).row(0), truncated};
}

ag::Var TaskModel::classify(ag::Graph& g, ag::Var h, bool train) {
  if (g.value(h).cols() != cfg_.embed_dim || g.value(h).rows() != 1) {
    throw ShapeError("classify: expected 1x" + std::to_string(cfg_.embed_dim) + " embedding");
  }
  ag::Var z = g.tanh(head_hidden_layer_.forward(g, h, train));
  return head_out_.forward(g, z, train);
}

Logits TaskModel::classify(const Embedding& h) const {
  if (h.size() != cfg_.embed_dim) {
    throw ShapeError("classify: embedding has " + std::to_string(h.size()) + " entries, expected " +
                     std::to_string(cfg_.embed_dim));
  }
  ag::Graph g;
  ag::Var hv = g.input(h);
  ag::Var out = const_cast<TaskModel*>(this)->classify(g, hv, false);
  return g.value(out).row(0);
}

int TaskModel::predict(std::string_view text) const {
  const Logits l = classify(embed(text));
  Eigen::Index arg = 0;
  l.maxCoeff(&arg);
  return static_cast<int>(arg);
}

std::vector<ag::Parameter*> TaskModel::parameters() {
  std::vector<ag::Parameter*> out;
  encoder_.collect(out);
  head_hidden_layer_.collect(out);
  head_out_.collect(out);
  return out;
}

std::vector<const ag::Parameter*> TaskModel::parameters() const {
  auto ps = const_cast<TaskModel*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

std::vector<ag::Parameter*> TaskModel::head_parameters() {
  std::vector<ag::Parameter*> out;
  head_hidden_layer_.collect(out);
  head_out_.collect(out);
  return out;
}

std::uint64_t TaskModel::checksum() const {
  const auto ps = parameters();
  return ag::checksum(ps);
}

void TaskModel::save(const std::filesystem::path& path) const {
  json j;
  j["format"] = "invmix.task_model";
  j["version"] = 1;
  j["config"] = {{"embed_dim", cfg_.embed_dim}, {"layers", cfg_.layers},   {"ff_dim", cfg_.ff_dim},
                 {"max_len", cfg_.max_len},     {"pooling", to_string(cfg_.pooling)}, {"seed", cfg_.seed},
                 {"head_hidden", head_hidden_}};
  j["vocab"] = vocab_.tokens();
  j["labels"] = {{"names", labels_.names()}, {"descriptions", labels_.descriptions()}};
  auto ps = const_cast<TaskModel*>(this)->parameters();
  j["params"] = detail::params_to_json(ps);
  write_file_atomic(path, j.dump());
}

TaskModel TaskModel::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  detail::require_format(j, "invmix.task_model", 1);
  const json& c = j.at("config");
  EncoderConfig cfg;
  cfg.embed_dim = c.at("embed_dim").get<int>();
  cfg.layers = c.at("layers").get<int>();
  cfg.ff_dim = c.at("ff_dim").get<int>();
  cfg.max_len = c.at("max_len").get<int>();
  cfg.pooling = pooling_from_string(c.at("pooling").get<std::string>());
  cfg.seed = c.at("seed").get<std::uint64_t>();
  LabelSpace ls(j.at("labels").at("names").get<std::vector<std::string>>(),
                j.at("labels").at("descriptions").get<std::vector<std::string>>());
  TaskModel m(cfg, Vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>()), std::move(ls),
              c.at("head_hidden").get<int>());
  auto ps = m.parameters();
  detail::params_from_json(j.at("params"), ps);
  return m;
}

// --- losses -------------------------------------------------------------------

Eigen::RowVectorXd softmax(const Logits& logits) {
  const double mx = logits.maxCoeff();
  Eigen::RowVectorXd e = (logits.array() - mx).exp();
  return e / e.sum();
}

namespace {

double cross_entropy(const Logits& logits, std::span<const double> target) {
  if (static_cast<Eigen::Index>(target.size()) != logits.size()) {
    throw ShapeError("cls_loss: target length " + std::to_string(target.size()) + " != logits length " +
                     std::to_string(logits.size()));
  }
  if (!logits.allFinite()) throw DomainError("cls_loss: non-finite logits");
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  double loss = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (target[k] != 0.0) loss -= target[k] * (logits(static_cast<Eigen::Index>(k)) - lse);
  }
  return std::max(loss, 0.0);
}

}  // namespace

double cls_loss(const Logits& logits, std::span<const double> onehot) {
  int ones = 0;
  for (double v : onehot) {
    if (v == 1.0) {
      ++ones;
    } else if (v != 0.0) {
      throw DomainError("cls_loss: target is not one-hot");
    }
  }
  if (ones != 1) throw DomainError("cls_loss: target is not one-hot");
  return cross_entropy(logits, onehot);
}

double cls_loss(const Logits& logits, const SoftLabel& target) { return cross_entropy(logits, target.probs); }

Eigen::RowVectorXd cls_loss_grad(const Logits& logits, std::span<const double> target) {
  if (static_cast<Eigen::Index>(target.size()) != logits.size()) throw ShapeError("cls_loss_grad: length mismatch");
  const Eigen::Map<const Eigen::RowVectorXd> y(target.data(), static_cast<Eigen::Index>(target.size()));
  return softmax(logits) * y.sum() - y;
}

// --- training -----------------------------------------------------------------

std::vector<TrainingItem> training_items(const Corpus& corpus, LabelMode mode) {
  std::vector<TrainingItem> out;
  switch (corpus.kind) {
    case CorpusKind::task:
      for (const auto& e : corpus.labeled) out.push_back({e.text, e.onehot});
      break;
    case CorpusKind::augmented: {
      const int K = corpus.label_space->size();
      for (const auto& s : corpus.synthetic) {
        if (mode == LabelMode::soft) {
          out.push_back({s.text, s.soft_label.probs});
        } else if (s.hard_label) {
          out.push_back({s.text, to_onehot(*s.hard_label, K)});
        }
      }
      break;
    }
    case CorpusKind::unlabeled:
      throw DomainError("an unlabeled corpus has no training targets");
  }
  return out;
}

TrainLog train_classifier(TaskModel& model, std::span<const TrainingItem> items, const ClassifierSchedule& schedule) {
  TrainLog log;
  if (schedule.epochs <= 0 || items.empty()) return log;
  const int K = model.num_classes();
  for (const auto& it : items) {
    if (static_cast<int>(it.target.size()) != K) throw ShapeError("training item target length != K");
  }
  Adam opt(model.parameters(), schedule.adam);
  std::mt19937_64 rng(schedule.seed);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = static_cast<std::size_t>(std::max(1, schedule.batch_size));

  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    long batch_id = 0;
    for (std::size_t start = 0; start < order.size(); start += bs, ++batch_id) {
      const std::size_t end = std::min(order.size(), start + bs);
      opt.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const TrainingItem& it = items[order[i]];
        ag::Graph g;
        ag::Var logits = model.classify(g, model.embed(g, it.text, true), true);
        ag::Matrix target(1, K);
        for (int k = 0; k < K; ++k) target(0, k) = it.target[static_cast<std::size_t>(k)];
        ag::Var loss = g.soft_cross_entropy(logits, target);
        batch_loss += g.scalar(loss);
        g.backward(loss);
      }
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "non-finite classification loss (lr=" << schedule.adam.lr << ", epoch=" << epoch
            << ", batch=" << batch_id << ")";
        throw TrainingError(msg.str());
      }
      opt.step(1.0 / static_cast<double>(end - start));
      total += batch_loss;
    }
    log.epoch_loss.push_back(total / static_cast<double>(items.size()));
  }
  return log;
}

double training_accuracy(const TaskModel& model, std::span<const TrainingItem> items) {
  if (items.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& it : items) {
    const int gold = static_cast<int>(std::max_element(it.target.begin(), it.target.end()) - it.target.begin());
    if (model.predict(it.text) == gold) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(items.size());
}

}  // namespace invmix

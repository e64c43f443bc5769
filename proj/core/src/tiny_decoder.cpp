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
#include "invmix/tiny_decoder.hpp"

#include "checkpoint.hpp"
#include "invmix/adaptor.hpp"
#include "invmix/errors.hpp"
#include "invmix/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace invmix {

using nlohmann::json;

TinyDecoder::TinyDecoder(DecoderConfig cfg, Vocabulary vocab, std::string name)
    : cfg_(cfg), vocab_(std::move(vocab)), name_(std::move(name)) {
  if (cfg_.dim <= 0 || cfg_.layers <= 0 || cfg_.ff_dim <= 0 || cfg_.max_ctx <= 1) {
    throw DomainError("decoder dimensions must be positive");
  }
  std::mt19937_64 rng(cfg_.seed);
  tok_emb_ = ag::Parameter("dec.tok", nn::normal_init(vocab_.size(), cfg_.dim, 1.0, rng));
  pos_emb_ = ag::Parameter("dec.pos", nn::normal_init(cfg_.max_ctx, cfg_.dim, 0.1, rng));
  for (int l = 0; l < cfg_.layers; ++l)
    blocks_.emplace_back("dec.block" + std::to_string(l), cfg_.dim, cfg_.ff_dim, rng);
  final_ln_ = nn::LayerNorm("dec.ln_f", cfg_.dim);
  out_ = nn::Linear("dec.out", cfg_.dim, vocab_.size(), 1.0 / std::sqrt(cfg_.dim), rng);
}

unsigned TinyDecoder::capabilities() const {
  return Capability::teacher_forced_logprob | Capability::sample | Capability::greedy |
         Capability::embedding_injection;
}

std::vector<ag::Parameter*> TinyDecoder::parameters() {
  std::vector<ag::Parameter*> out{&tok_emb_, &pos_emb_};
  for (auto& b : blocks_) b.collect(out);
  final_ln_.collect(out);
  out_.collect(out);
  return out;
}

std::uint64_t TinyDecoder::parameter_checksum() const {
  const auto ps = const_cast<TinyDecoder*>(this)->parameters();
  return ag::checksum(ps);
}

ag::Var TinyDecoder::forward_logits(ag::Graph& g, const SoftPrompt& prompt, ag::Var soft, std::span<const int> tail,
                                    bool train) const {
  const ag::Matrix& sv = g.value(soft);
  if (sv.cols() != cfg_.dim) {
    throw ShapeError("soft tokens have width " + std::to_string(sv.cols()) + ", decoder expects " +
                     std::to_string(cfg_.dim));
  }
  const int n = static_cast<int>(prompt.prefix_tokens.size() + prompt.suffix_tokens.size() + tail.size()) +
                static_cast<int>(sv.rows());
  if (n > cfg_.max_ctx) {
    throw ShapeError("sequence of " + std::to_string(n) + " exceeds decoder context " + std::to_string(cfg_.max_ctx));
  }
  ag::Var table = nn::bind(g, tok_emb_, train);
  std::vector<ag::Var> parts;
  if (!prompt.prefix_tokens.empty()) parts.push_back(g.gather_rows(table, prompt.prefix_tokens));
  if (sv.rows() > 0) parts.push_back(soft);
  if (!prompt.suffix_tokens.empty()) parts.push_back(g.gather_rows(table, prompt.suffix_tokens));
  if (!tail.empty()) parts.push_back(g.gather_rows(table, tail));
  ag::Var x = g.concat_rows(parts);
  x = g.add(x, g.slice_rows(nn::bind(g, pos_emb_, train), 0, n));
  for (auto& b : blocks_) x = b.forward(g, x, /*causal=*/true, train);
  x = final_ln_.forward(g, x, train);
  return out_.forward(g, x, train);
}

ag::Var TinyDecoder::nll(ag::Graph& g, const SoftPrompt& prompt, ag::Var soft, bool train) const {
  const auto& tgt = prompt.target_tokens;
  if (tgt.empty()) throw DomainError("generation loss needs target tokens");
  const std::span<const int> tail(tgt.data(), tgt.size() - 1);
  ag::Var logits = forward_logits(g, prompt, soft, tail, train);
  // Position of the last prompt token predicts the first target token.
  const int first = static_cast<int>(prompt.prefix_tokens.size() + prompt.suffix_tokens.size()) +
                    static_cast<int>(g.value(soft).rows()) - 1;
  if (first < 0) throw ShapeError("prompt is empty");
  ag::Var rows = g.slice_rows(logits, first, static_cast<int>(tgt.size()));
  return g.cross_entropy(rows, tgt);
}

ag::Var TinyDecoder::teacher_forced_nll(ag::Graph& g, const SoftPrompt& prompt, ag::Var soft) const {
  return nll(g, prompt, soft, /*train=*/false);
}

ag::Matrix TinyDecoder::sequence_logits(const SoftPrompt& prompt, std::span<const int> tail) const {
  ag::Graph g;
  ag::Var soft = g.input(prompt.soft_vectors);
  return g.value(forward_logits(g, prompt, soft, tail, false));
}

std::vector<double> TinyDecoder::target_logprobs(const SoftPrompt& prompt) const {
  const auto& tgt = prompt.target_tokens;
  if (tgt.empty()) return {};
  const ag::Matrix logits = sequence_logits(prompt, std::span<const int>(tgt.data(), tgt.size() - 1));
  const int first = static_cast<int>(prompt.prefix_tokens.size() + prompt.suffix_tokens.size()) +
                    static_cast<int>(prompt.soft_vectors.rows()) - 1;
  std::vector<double> out;
  out.reserve(tgt.size());
  for (std::size_t t = 0; t < tgt.size(); ++t) {
    const Eigen::RowVectorXd row = logits.row(first + static_cast<Eigen::Index>(t));
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    out.push_back(row(tgt[t]) - lse);
  }
  return out;
}

std::vector<int> TinyDecoder::generate(const SoftPrompt& prompt, const DecodeConfig& cfg, std::mt19937_64& rng) const {
  const int base = static_cast<int>(prompt.prefix_tokens.size() + prompt.suffix_tokens.size()) +
                   static_cast<int>(prompt.soft_vectors.rows());
  std::vector<int> out;
  for (int step = 0; step < cfg.max_new_tokens && base + static_cast<int>(out.size()) < cfg_.max_ctx; ++step) {
    const ag::Matrix logits = sequence_logits(prompt, out);
    Eigen::RowVectorXd last = logits.row(logits.rows() - 1);
    // Never emit padding, [CLS] or <bos> mid-sentence.
    for (int s : {Vocabulary::kPad, Vocabulary::kBos, Vocabulary::kCls}) last(s) = -1e30;
    const int tok = choose_token(last, cfg, rng);
    if (tok == Vocabulary::kEos) break;
    out.push_back(tok);
  }
  return out;
}

void TinyDecoder::save(const std::filesystem::path& path) const {
  json j;
  j["format"] = "invmix.tiny_decoder";
  j["version"] = 1;
  j["name"] = name_;
  j["config"] = {{"dim", cfg_.dim},
                 {"layers", cfg_.layers},
                 {"ff_dim", cfg_.ff_dim},
                 {"max_ctx", cfg_.max_ctx},
                 {"seed", cfg_.seed}};
  j["vocab"] = vocab_.tokens();
  auto ps = const_cast<TinyDecoder*>(this)->parameters();
  j["params"] = detail::params_to_json(ps);
  write_file_atomic(path, j.dump());
}

TinyDecoder TinyDecoder::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  detail::require_format(j, "invmix.tiny_decoder", 1);
  const json& c = j.at("config");
  DecoderConfig cfg;
  cfg.dim = c.at("dim").get<int>();
  cfg.layers = c.at("layers").get<int>();
  cfg.ff_dim = c.at("ff_dim").get<int>();
  cfg.max_ctx = c.at("max_ctx").get<int>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  TinyDecoder d(cfg, Vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>()),
                j.at("name").get<std::string>());
  auto ps = d.parameters();
  detail::params_from_json(j.at("params"), ps);
  return d;
}

// --- pretraining ----------------------------------------------------------------

struct DecoderPretrainer {
  static PretrainReport run(TinyDecoder& dec, std::span<const std::string> sentences, const PromptTemplate& tmpl,
                            const DecoderPretrainConfig& cfg) {
    PretrainReport report;
    if (cfg.epochs <= 0 || sentences.empty()) return report;

    EncoderConfig ccfg;
    ccfg.embed_dim = cfg.conditioner_dim;
    ccfg.layers = 1;
    ccfg.ff_dim = 2 * cfg.conditioner_dim;
    ccfg.max_len = dec.cfg_.max_ctx;
    ccfg.pooling = Pooling::mean;
    ccfg.seed = cfg.seed ^ 0x5bd1e995ULL;
    SentenceEncoder conditioner(ccfg, dec.vocab_.size(), "cond");
    std::mt19937_64 rng(cfg.seed);
    nn::Linear proj("cond.proj", cfg.conditioner_dim, dec.cfg_.dim, 1.0 / std::sqrt(cfg.conditioner_dim), rng);

    std::vector<ag::Parameter*> params = dec.parameters();
    conditioner.collect(params);
    proj.collect(params);
    Adam opt(params, cfg.adam);

    std::vector<SoftPrompt> prompts;
    std::vector<std::vector<int>> ids;
    for (const auto& s : sentences) {
      prompts.push_back(build_prompt(tmpl, dec.vocab_, ag::Matrix::Zero(1, dec.cfg_.dim), s, dec.cfg_.max_ctx));
      ids.push_back(dec.vocab_.encode(s));
    }
    std::vector<std::size_t> order(sentences.size());
    std::iota(order.begin(), order.end(), 0);
    std::bernoulli_distribution partial(cfg.partial_prob);
    std::bernoulli_distribution drop(cfg.word_drop);
    std::normal_distribution<double> noise(0.0, 1.0);
    const std::size_t bs = static_cast<std::size_t>(std::max(1, cfg.batch_size));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      double total = 0.0;
      for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::size_t end = std::min(order.size(), start + bs);
        opt.zero_grad();
        for (std::size_t i = start; i < end; ++i) {
          const std::size_t k = order[i];
          std::vector<int> cond_ids = ids[k];
          if (partial(rng) && cond_ids.size() > 1) {
            std::vector<int> kept;
            for (int t : cond_ids)
              if (!drop(rng)) kept.push_back(t);
            if (kept.empty()) kept.push_back(cond_ids[std::uniform_int_distribution<std::size_t>(0, cond_ids.size() - 1)(rng)]);
            cond_ids = std::move(kept);
          }
          ag::Graph g;
          ag::Var soft = proj.forward(g, conditioner.forward(g, cond_ids, true), true);
          if (cfg.noise_std > 0.0) {
            ag::Matrix eps(1, dec.cfg_.dim);
            for (Eigen::Index c = 0; c < eps.cols(); ++c) eps(0, c) = cfg.noise_std * noise(rng);
            soft = g.add(soft, g.input(eps));
          }
          ag::Var loss = dec.nll(g, prompts[k], soft, /*train=*/true);
          const double lv = g.scalar(loss);
          if (!std::isfinite(lv)) throw TrainingError("non-finite loss while pretraining the decoder");
          total += lv;
          g.backward(loss);
        }
        opt.step(1.0 / static_cast<double>(end - start));
      }
      report.epoch_loss.push_back(total / static_cast<double>(sentences.size()));
    }
    return report;
  }
};

PretrainReport pretrain_decoder(TinyDecoder& decoder, std::span<const std::string> sentences,
                                const PromptTemplate& tmpl, const DecoderPretrainConfig& cfg) {
  return DecoderPretrainer::run(decoder, sentences, tmpl, cfg);
}

}  // namespace invmix

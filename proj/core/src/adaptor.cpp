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
#include "invmix/adaptor.hpp"

#include "checkpoint.hpp"
#include "invmix/errors.hpp"
#include "invmix/io.hpp"
#include "invmix/nn.hpp"

#include <algorithm>

namespace invmix {

using nlohmann::json;

Adaptor::Adaptor(AdaptorConfig cfg) : cfg_(cfg) {
  if (cfg_.embed_dim <= 0 || cfg_.decoder_input_dim <= 0 || cfg_.n_soft_tokens <= 0) {
    throw DomainError("adaptor dimensions must be positive");
  }
  std::mt19937_64 rng(cfg_.seed);
  const int out = cfg_.n_soft_tokens * cfg_.decoder_input_dim;
  weight_ = ag::Parameter("adaptor.w", nn::normal_init(cfg_.embed_dim, out, cfg_.init_std, rng));
  bias_ = ag::Parameter("adaptor.b", ag::Matrix::Zero(1, out));
}

ag::Var Adaptor::adapt(ag::Graph& g, ag::Var h, bool train) {
  const ag::Matrix& hv = g.value(h);
  if (hv.rows() != 1 || hv.cols() != cfg_.embed_dim) {
    throw ShapeError("adapt: expected 1x" + std::to_string(cfg_.embed_dim) + " embedding, got " +
                     std::to_string(hv.rows()) + "x" + std::to_string(hv.cols()));
  }
  ag::Var flat = g.matmul(h, nn::bind(g, weight_, train));
  if (cfg_.bias) flat = g.add_row(flat, nn::bind(g, bias_, train));
  return g.reshape_row(flat, cfg_.n_soft_tokens, cfg_.decoder_input_dim);
}

ag::Matrix Adaptor::adapt(const Embedding& h) const {
  if (h.size() != cfg_.embed_dim) {
    throw ShapeError("adapt: embedding has " + std::to_string(h.size()) + " entries, expected " +
                     std::to_string(cfg_.embed_dim));
  }
  Eigen::RowVectorXd flat = h * weight_.value;
  if (cfg_.bias) flat += bias_.value.row(0);
  ag::Matrix out(cfg_.n_soft_tokens, cfg_.decoder_input_dim);
  for (int r = 0; r < cfg_.n_soft_tokens; ++r)
    out.row(r) = flat.segment(static_cast<Eigen::Index>(r) * cfg_.decoder_input_dim, cfg_.decoder_input_dim);
  return out;
}

std::vector<ag::Parameter*> Adaptor::parameters() {
  std::vector<ag::Parameter*> out{&weight_};
  if (cfg_.bias) out.push_back(&bias_);
  return out;
}

std::vector<const ag::Parameter*> Adaptor::parameters() const {
  auto ps = const_cast<Adaptor*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

std::uint64_t Adaptor::checksum() const {
  const auto ps = parameters();
  return ag::checksum(ps);
}

void Adaptor::save(const std::filesystem::path& path, const std::string& template_name,
                   const std::string& backend_id) const {
  json j;
  j["format"] = "invmix.adaptor";
  j["version"] = 1;
  j["config"] = {{"embed_dim", cfg_.embed_dim},
                 {"decoder_input_dim", cfg_.decoder_input_dim},
                 {"n_soft_tokens", cfg_.n_soft_tokens},
                 {"init_std", cfg_.init_std},
                 {"bias", cfg_.bias},
                 {"seed", cfg_.seed}};
  j["template"] = template_name;
  j["backend"] = backend_id;
  auto ps = const_cast<Adaptor*>(this)->parameters();
  j["params"] = detail::params_to_json(ps);
  write_file_atomic(path, j.dump());
}

Adaptor::Loaded Adaptor::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  detail::require_format(j, "invmix.adaptor", 1);
  const json& c = j.at("config");
  AdaptorConfig cfg;
  cfg.embed_dim = c.at("embed_dim").get<int>();
  cfg.decoder_input_dim = c.at("decoder_input_dim").get<int>();
  cfg.n_soft_tokens = c.at("n_soft_tokens").get<int>();
  cfg.init_std = c.at("init_std").get<double>();
  cfg.bias = c.at("bias").get<bool>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  Loaded out{Adaptor(cfg), j.at("template").get<std::string>(), j.at("backend").get<std::string>()};
  auto ps = out.adaptor.parameters();
  detail::params_from_json(j.at("params"), ps);
  return out;
}

// --- prompts and losses ---------------------------------------------------------

SoftPrompt build_prompt(const PromptTemplate& tmpl, const Vocabulary& vocab, ag::Matrix soft_vectors,
                        const std::optional<std::string>& target, int max_context) {
  SoftPrompt p;
  p.prefix_tokens = vocab.encode(tmpl.prefix());
  p.suffix_tokens = vocab.encode(tmpl.suffix());
  p.closing_tokens = vocab.encode(tmpl.closing());
  p.slot_position = static_cast<int>(p.prefix_tokens.size());
  p.soft_vectors = std::move(soft_vectors);
  if (target) {
    std::vector<int> sentence = vocab.encode(*target);
    const int fixed = static_cast<int>(p.prefix_tokens.size() + p.suffix_tokens.size() + p.closing_tokens.size()) +
                      static_cast<int>(p.soft_vectors.rows()) + 1;
    // Teacher forcing feeds all but the last target id, hence the +1.
    const int budget = max_context > 0 ? max_context - fixed + 1 : static_cast<int>(sentence.size());
    if (budget < 1) throw ShapeError("prompt template alone exceeds the decoder context");
    if (static_cast<int>(sentence.size()) > budget) {
      sentence.resize(static_cast<std::size_t>(budget));
      p.truncated = true;
    }
    p.target_tokens = std::move(sentence);
    p.target_tokens.insert(p.target_tokens.end(), p.closing_tokens.begin(), p.closing_tokens.end());
    p.target_tokens.push_back(Vocabulary::kEos);
  }
  return p;
}

ag::Var gen_loss(ag::Graph& g, const SoftPrompt& prompt, ag::Var soft, const DecoderBackend& backend) {
  if (!backend.has(Capability::teacher_forced_logprob)) {
    throw CapabilityError("backend '" + backend.id() +
                          "' cannot score tokens; training the adaptor needs a local backend with log-probabilities");
  }
  if (prompt.target_tokens.empty()) throw DomainError("gen_loss: prompt has no target tokens");
  return backend.teacher_forced_nll(g, prompt, soft);
}

double gen_loss(const SoftPrompt& prompt, const DecoderBackend& backend) {
  ag::Graph g;
  ag::Var soft = g.input(prompt.soft_vectors);
  return g.scalar(gen_loss(g, prompt, soft, backend));
}

ag::Var gen_loss(ag::Graph& g, std::string_view text, TaskModel& theta, bool train_theta, Adaptor& phi,
                 bool train_phi, const DecoderBackend& backend, const PromptTemplate& tmpl) {
  ag::Var h = theta.embed(g, text, train_theta);
  ag::Var soft = phi.adapt(g, h, train_phi);
  SoftPrompt prompt = build_prompt(tmpl, backend.vocabulary(), g.value(soft), std::string(text), backend.max_context());
  return gen_loss(g, prompt, soft, backend);
}

std::string invert(const Embedding& h, const Adaptor& phi, const DecoderBackend& backend, const PromptTemplate& tmpl,
                   const DecodeConfig& decode, std::mt19937_64& rng) {
  if (!backend.has(Capability::embedding_injection)) {
    throw CapabilityError("backend '" + backend.id() +
                          "' cannot accept soft tokens; inversion needs a backend with input-embedding injection");
  }
  const Capability need = decode.mode == DecodeConfig::Mode::greedy ? Capability::greedy : Capability::sample;
  if (!backend.has(need)) throw CapabilityError("backend '" + backend.id() + "' lacks " + std::string(to_string(need)));

  SoftPrompt prompt = build_prompt(tmpl, backend.vocabulary(), phi.adapt(h));
  std::vector<int> ids = backend.generate(prompt, decode, rng);
  const std::string raw = backend.vocabulary().decode(ids);
  const auto& close = prompt.closing_tokens;
  if (!close.empty() && ids.size() >= close.size() && std::equal(close.begin(), close.end(), ids.end() - static_cast<std::ptrdiff_t>(close.size()))) {
    ids.resize(ids.size() - close.size());
  }
  std::string text = backend.vocabulary().decode(ids);
  if (text.empty()) {
    throw GenerationError("decoder produced no sentence within " + std::to_string(decode.max_new_tokens) + " tokens",
                          raw);
  }
  return text;
}

}  // namespace invmix

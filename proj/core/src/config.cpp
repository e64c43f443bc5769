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
#include "invmix/toy.hpp"
#include "invmix/config.hpp"

#include "invmix/errors.hpp"
#include "invmix/io.hpp"
#include "invmix/toy.hpp"

namespace invmix {

using nlohmann::json;
namespace fs = std::filesystem;

json default_config() {
  return json::parse(R"({
  "output_dir": null,
  "seed": 1,
  "prompts": null,
  "data": {"label_space": "toy", "dataset": "toy", "unlabeled": null, "task": null, "test": null,
           "k_shot": 1, "unlabeled_limit": 0},
  "encoder": {"embed_dim": 64, "layers": 1, "ff_dim": 128, "max_len": 32, "pooling": "cls", "head_hidden": 64},
  "decoder": {"dim": 64, "layers": 2, "ff_dim": 128, "max_ctx": 64,
              "pretrain": {"epochs": 30, "batch_size": 8, "lr": 0.003, "clip_norm": 1.0, "partial_prob": 0.3,
                           "word_drop": 0.3, "noise_std": 0.0, "conditioner_dim": 64}},
  "adaptor": {"input_dim": 64, "n_soft_tokens": 1, "init_std": 0.02, "bias": true},
  "align": {"epochs": 10, "batch_size": 8, "lr": 2e-5, "divergence_factor": 10.0, "divergence_patience": 2},
  "refine": {"outer_rounds": 3, "cls_epochs_per_round": 1, "gen_epochs_per_round": 1, "gen_lr": 2e-5},
  "classifier": {"epochs": 10, "batch_size": 8, "lr": 2e-5},
  "mix": {"alpha": 0.4, "lambda": null, "num_samples": 60, "pair_policy": "uniform_pairs", "decode": "sample",
          "temperature": 1.0, "top_p": 0.9, "max_new_tokens": 64, "retries": 3, "threads": 1,
          "feedback_epochs": null},
  "judge": {"kind": "keyword", "lexicon": "toy", "tolerance": 0.3, "retries": 3, "threads": 1, "sample_size": 100,
            "buckets": [0.5, 0.6, 0.7, 0.8, 0.9],
            "remote": {"base_url": null, "path": "/v1/complete", "model": "remote", "token_env": "INVMIX_API_TOKEN",
                       "max_in_flight": 4, "retries": 3, "backoff_ms": 200, "timeout_s": 60}},
  "eval": {"methods": ["base", "soft"], "seeds": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10], "lambda_grid": [],
           "similarity": true}
})");
}

namespace {

// Keys whose value may be a string or an object (inline label space) or null.
bool free_form(const std::string& path) { return path == "data.label_space"; }
bool nullable(const std::string& path) {
  return path == "output_dir" || path == "prompts" || path == "mix.lambda" || path == "mix.feedback_epochs" || path == "data.unlabeled" ||
         path == "data.task" || path == "data.test" || path == "judge.remote.base_url";
}

std::string type_name(const json& v) {
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  return v.type_name();
}

void merge(json& into, const json& from, const std::string& prefix) {
  if (!from.is_object()) throw ConfigError(prefix.empty() ? "configuration must be a JSON object" : "'" + prefix + "' must be an object");
  for (const auto& [key, value] : from.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!into.contains(key)) throw ConfigError("unknown configuration key '" + path + "'");
    json& slot = into[key];
    if (free_form(path)) {
      slot = value;
    } else if (slot.is_object()) {
      merge(slot, value, path);
    } else if (value.is_null()) {
      if (!nullable(path)) throw ConfigError("key '" + path + "' may not be null");
      slot = value;
    } else if (slot.is_null()) {
      const bool ok = path == "mix.lambda"            ? value.is_number()
                      : path == "mix.feedback_epochs" ? value.is_number_integer()
                                                      : value.is_string();
      if (!ok) {
        throw ConfigError("key '" + path + "' has type " + type_name(value));
      }
      slot = value;
    } else {
      const bool ok = slot.is_number_integer()   ? value.is_number_integer() && (!slot.is_number_unsigned() || value.get<long long>() >= 0)
                      : slot.is_number()         ? value.is_number()
                      : slot.is_array()          ? value.is_array()
                                                 : slot.type() == value.type();
      if (!ok) throw ConfigError("key '" + path + "' expects " + type_name(slot) + ", got " + type_name(value));
      slot = value;
    }
  }
}

template <class T>
T get(const json& j, const std::string& path) {
  const json* cur = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    cur = &cur->at(path.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return cur->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("key '" + path + "' has the wrong type");
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

fs::path resolve(const fs::path& base, const json& v) {
  if (v.is_null()) return {};
  fs::path p = v.get<std::string>();
  return p.is_relative() ? base / p : p;
}

LabelSpace label_space_from(const json& v) {
  try {
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      return s == "toy" ? toy::labels() : LabelSpace::builtin(s);
    }
    if (v.is_object()) {
      for (const auto& [k, _] : v.items())
        if (k != "names" && k != "descriptions") throw ConfigError("unknown configuration key 'data.label_space." + k + "'");
      return LabelSpace(v.at("names").get<std::vector<std::string>>(), v.at("descriptions").get<std::vector<std::string>>());
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("data.label_space: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("data.label_space: ") + e.what());
  }
  throw ConfigError("data.label_space must be a name or {names, descriptions}");
}

}  // namespace

RunConfig config_from_json(const json& user, const fs::path& base, bool check_paths) {
  json j = default_config();
  merge(j, user, "");
  require(!j["output_dir"].is_null(), "missing required key 'output_dir'");
  require(!j["data"]["task"].is_null(), "missing required key 'data.task'");

  RunConfig c;
  c.effective = j;
  c.output_dir = resolve(base, j["output_dir"]);
  c.seed = get<std::uint64_t>(j, "seed");
  if (!j["prompts"].is_null()) c.prompts = resolve(base, j["prompts"]);

  c.data.labels = label_space_from(j["data"]["label_space"]);
  c.data.dataset = get<std::string>(j, "data.dataset");
  c.data.unlabeled = resolve(base, j["data"]["unlabeled"]);
  c.data.task = resolve(base, j["data"]["task"]);
  c.data.test = resolve(base, j["data"]["test"]);
  c.data.k_shot = get<int>(j, "data.k_shot");
  c.data.unlabeled_limit = get<int>(j, "data.unlabeled_limit");
  require(c.data.k_shot >= 0, "data.k_shot must be >= 0");
  require(c.data.unlabeled_limit >= 0, "data.unlabeled_limit must be >= 0");

  c.encoder.embed_dim = get<int>(j, "encoder.embed_dim");
  c.encoder.layers = get<int>(j, "encoder.layers");
  c.encoder.ff_dim = get<int>(j, "encoder.ff_dim");
  c.encoder.max_len = get<int>(j, "encoder.max_len");
  try {
    c.encoder.pooling = pooling_from_string(get<std::string>(j, "encoder.pooling"));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("encoder.pooling: ") + e.what());
  }
  c.encoder.seed = c.seed;
  c.head_hidden = get<int>(j, "encoder.head_hidden");
  require(c.encoder.embed_dim > 0 && c.encoder.layers > 0 && c.encoder.ff_dim > 0 && c.encoder.max_len > 0 &&
              c.head_hidden > 0,
          "encoder dimensions must be positive");

  c.decoder.dim = get<int>(j, "decoder.dim");
  c.decoder.layers = get<int>(j, "decoder.layers");
  c.decoder.ff_dim = get<int>(j, "decoder.ff_dim");
  c.decoder.max_ctx = get<int>(j, "decoder.max_ctx");
  c.decoder.seed = c.seed + 1;
  require(c.decoder.dim > 0 && c.decoder.layers > 0 && c.decoder.ff_dim > 0 && c.decoder.max_ctx > 1,
          "decoder dimensions must be positive");
  c.pretrain.epochs = get<int>(j, "decoder.pretrain.epochs");
  c.pretrain.batch_size = get<int>(j, "decoder.pretrain.batch_size");
  c.pretrain.adam.lr = get<double>(j, "decoder.pretrain.lr");
  c.pretrain.adam.clip_norm = get<double>(j, "decoder.pretrain.clip_norm");
  c.pretrain.partial_prob = get<double>(j, "decoder.pretrain.partial_prob");
  c.pretrain.word_drop = get<double>(j, "decoder.pretrain.word_drop");
  c.pretrain.noise_std = get<double>(j, "decoder.pretrain.noise_std");
  c.pretrain.conditioner_dim = get<int>(j, "decoder.pretrain.conditioner_dim");
  c.pretrain.seed = c.seed + 2;

  c.adaptor.embed_dim = get<int>(j, "adaptor.input_dim");
  c.adaptor.decoder_input_dim = c.decoder.dim;
  c.adaptor.n_soft_tokens = get<int>(j, "adaptor.n_soft_tokens");
  c.adaptor.init_std = get<double>(j, "adaptor.init_std");
  c.adaptor.bias = get<bool>(j, "adaptor.bias");
  c.adaptor.seed = c.seed + 3;
  if (c.adaptor.embed_dim != c.encoder.embed_dim) {
    throw ConfigError("adaptor.input_dim (" + std::to_string(c.adaptor.embed_dim) + ") must equal encoder.embed_dim (" +
                      std::to_string(c.encoder.embed_dim) + ")");
  }
  require(c.adaptor.n_soft_tokens > 0, "adaptor.n_soft_tokens must be positive");

  c.align.epochs = get<int>(j, "align.epochs");
  c.align.batch_size = get<int>(j, "align.batch_size");
  c.align.adam.lr = get<double>(j, "align.lr");
  c.align.divergence_factor = get<double>(j, "align.divergence_factor");
  c.align.divergence_patience = get<int>(j, "align.divergence_patience");
  c.align.seed = c.seed + 4;
  require(c.align.epochs >= 0 && c.align.batch_size > 0, "align.epochs must be >= 0 and align.batch_size > 0");

  c.classifier.epochs = get<int>(j, "classifier.epochs");
  c.classifier.batch_size = get<int>(j, "classifier.batch_size");
  c.classifier.adam.lr = get<double>(j, "classifier.lr");
  c.classifier.seed = c.seed + 5;
  require(c.classifier.epochs >= 0 && c.classifier.batch_size > 0, "classifier.epochs must be >= 0 and batch_size > 0");

  c.refine.schedule.outer_rounds = get<int>(j, "refine.outer_rounds");
  c.refine.schedule.cls_epochs_per_round = get<int>(j, "refine.cls_epochs_per_round");
  c.refine.schedule.gen_epochs_per_round = get<int>(j, "refine.gen_epochs_per_round");
  try {
    c.refine.schedule.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  c.refine.cls = c.classifier;
  c.refine.gen = c.align;
  c.refine.gen.adam.lr = get<double>(j, "refine.gen_lr");

  c.mix.alpha = get<double>(j, "mix.alpha");
  if (!j["mix"]["lambda"].is_null()) c.mix.fixed_lambda = get<double>(j, "mix.lambda");
  c.mix.num_samples = get<int>(j, "mix.num_samples");
  if (!j["mix"]["feedback_epochs"].is_null()) {
    c.feedback_epochs = get<int>(j, "mix.feedback_epochs");
    require(*c.feedback_epochs >= 0, "mix.feedback_epochs must be >= 0");
  }
  c.mix.retries = get<int>(j, "mix.retries");
  c.mix.threads = get<int>(j, "mix.threads");
  c.mix.seed = c.seed + 6;
  const std::string decode = get<std::string>(j, "mix.decode");
  require(decode == "greedy" || decode == "sample", "mix.decode must be 'greedy' or 'sample'");
  c.mix.decode.mode = decode == "greedy" ? DecodeConfig::Mode::greedy : DecodeConfig::Mode::sample;
  c.mix.decode.temperature = get<double>(j, "mix.temperature");
  c.mix.decode.top_p = get<double>(j, "mix.top_p");
  c.mix.decode.max_new_tokens = get<int>(j, "mix.max_new_tokens");
  try {
    c.mix.pair_policy = pair_policy_from_string(get<std::string>(j, "mix.pair_policy"));
    c.mix.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  require(c.mix.decode.temperature > 0.0 && c.mix.decode.top_p > 0.0 && c.mix.decode.top_p <= 1.0 &&
              c.mix.decode.max_new_tokens > 0,
          "mix decoding needs temperature > 0, top_p in (0, 1] and max_new_tokens > 0");

  const std::string kind = get<std::string>(j, "judge.kind");
  require(kind == "keyword" || kind == "remote", "judge.kind must be 'keyword' or 'remote'");
  c.judge.kind = kind == "keyword" ? JudgeSettings::Kind::keyword : JudgeSettings::Kind::remote;
  c.judge.lexicon = get<std::string>(j, "judge.lexicon");
  if (c.judge.lexicon != "toy") c.judge.lexicon = resolve(base, j["judge"]["lexicon"]).string();
  c.judge.tolerance = get<double>(j, "judge.tolerance");
  c.judge.options.retries = get<int>(j, "judge.retries");
  c.judge.options.threads = get<int>(j, "judge.threads");
  c.judge.sample_size = get<int>(j, "judge.sample_size");
  c.judge.buckets = get<std::vector<double>>(j, "judge.buckets");
  require(c.judge.options.retries >= 1 && c.judge.options.threads >= 1 && c.judge.sample_size >= 0,
          "judge.retries and judge.threads must be >= 1, judge.sample_size >= 0");
  require(!c.judge.buckets.empty(), "judge.buckets must not be empty");
  const json& r = j["judge"]["remote"];
  c.judge.remote.base_url = r["base_url"].is_null() ? "" : r["base_url"].get<std::string>();
  c.judge.remote.path = get<std::string>(j, "judge.remote.path");
  c.judge.remote.model = get<std::string>(j, "judge.remote.model");
  c.judge.remote.token_env = get<std::string>(j, "judge.remote.token_env");
  c.judge.remote.max_in_flight = get<int>(j, "judge.remote.max_in_flight");
  c.judge.remote.retries = get<int>(j, "judge.remote.retries");
  c.judge.remote.backoff = std::chrono::milliseconds(get<int>(j, "judge.remote.backoff_ms"));
  c.judge.remote.timeout = std::chrono::seconds(get<int>(j, "judge.remote.timeout_s"));
  if (c.judge.kind == JudgeSettings::Kind::remote) require(!c.judge.remote.base_url.empty(), "missing required key 'judge.remote.base_url'");

  c.eval.methods.clear();
  try {
    for (const auto& m : get<std::vector<std::string>>(j, "eval.methods")) c.eval.methods.push_back(method_from_string(m));
  } catch (const DomainError& e) {
    throw ConfigError(std::string("eval.methods: ") + e.what());
  }
  c.eval.seeds = get<std::vector<std::uint64_t>>(j, "eval.seeds");
  c.eval.lambda_grid = get<std::vector<double>>(j, "eval.lambda_grid");
  c.eval.similarity = get<bool>(j, "eval.similarity");
  require(!c.eval.methods.empty(), "eval.methods must not be empty");
  require(!c.eval.seeds.empty(), "eval.seeds must not be empty");
  for (double l : c.eval.lambda_grid) require(l >= 0.0 && l <= 1.0, "eval.lambda_grid entries must lie in [0, 1]");

  if (check_paths) {
    for (const auto& [key, p] : {std::pair<std::string, fs::path>{"data.unlabeled", c.data.unlabeled},
                                 {"data.task", c.data.task},
                                 {"data.test", c.data.test}}) {
      if (!p.empty() && !fs::exists(p)) throw ConfigError(key + " does not exist: " + p.string());
    }
    if (c.prompts && !fs::exists(*c.prompts)) throw ConfigError("prompts does not exist: " + c.prompts->string());
    if (c.judge.lexicon != "toy" && !fs::exists(c.judge.lexicon)) {
      throw ConfigError("judge.lexicon does not exist: " + c.judge.lexicon);
    }
  }
  return c;
}

RunConfig parse_config(const fs::path& path, bool check_paths) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path(), check_paths);
}

void apply_override(json& j, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* cur = &j;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("bad override key: " + path);
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      return;
    }
    if (!cur->contains(key) || !(*cur)[key].is_object()) (*cur)[key] = json::object();
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

}  // namespace invmix

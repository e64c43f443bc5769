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

// Run configuration: one JSON file, validated strictly, with defaults for
// everything except the output directory and the task data.

#include "invmix/adaptor.hpp"
#include "invmix/encoder.hpp"
#include "invmix/eval.hpp"
#include "invmix/judge.hpp"
#include "invmix/mixup.hpp"
#include "invmix/remote_backend.hpp"
#include "invmix/stages.hpp"
#include "invmix/tiny_decoder.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace invmix {

struct DataSettings {
  /// "toy", "trec", "agnews", "yahoo", or inline names/descriptions.
  LabelSpace labels;
  std::string dataset = "toy";
  std::filesystem::path unlabeled;
  std::filesystem::path task;
  std::filesystem::path test;
  /// Shots per class for refine/mix and eval; 0 uses the whole task file.
  int k_shot = 1;
  /// Upper bound on unlabeled sentences used for alignment; 0 = all.
  int unlabeled_limit = 0;
};

struct JudgeSettings {
  enum class Kind { keyword, remote } kind = Kind::keyword;
  /// keyword judge: "toy" or a JSON file {word: label name}.
  std::string lexicon = "toy";
  double tolerance = 0.3;
  RemoteConfig remote;
  JudgeOptions options;
  int sample_size = 100;
  std::vector<double> buckets = default_lambda_buckets();
};

struct EvalSettings {
  std::vector<Method> methods{Method::base, Method::soft};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  /// Fixed ratios for the soft-versus-hard comparison; empty skips it.
  std::vector<double> lambda_grid;
  bool similarity = true;
};

struct RunConfig {
  std::filesystem::path output_dir;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> prompts;
  DataSettings data;
  EncoderConfig encoder;
  int head_hidden = 64;
  DecoderConfig decoder;
  DecoderPretrainConfig pretrain;
  AdaptorConfig adaptor;
  AlignConfig align;
  RefineConfig refine;
  ClassifierSchedule classifier;
  MixConfig mix;
  /// When set, the mix stage further aligns the refined adaptor on the
  /// synthetic sentences for this many epochs.
  std::optional<int> feedback_epochs;
  JudgeSettings judge;
  EvalSettings eval;
  /// The validated configuration with defaults filled in.
  nlohmann::json effective;

  std::filesystem::path checkpoints() const { return output_dir / "checkpoints"; }
  std::filesystem::path augmented() const { return output_dir / "augmented"; }
  std::filesystem::path reports() const { return output_dir / "reports"; }
};

/// The configuration with every default spelled out.
nlohmann::json default_config();

/// Validates `j` against the schema: unknown keys and wrong types raise
/// ConfigError naming the key path. Relative paths resolve against `base`.
/// With `check_paths`, referenced input files must exist.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base, bool check_paths = true);

RunConfig parse_config(const std::filesystem::path& path, bool check_paths = true);

/// Applies "a.b.c=value" overrides; values parse as JSON, else as strings.
void apply_override(nlohmann::json& j, const std::string& assignment);

}  // namespace invmix

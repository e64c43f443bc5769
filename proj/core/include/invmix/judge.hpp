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

// Judging synthetic sentences with a text-completion model: hard labeling,
// the two-step manifold-intrusion protocol and its statistics, plus two
// offline judges (keyword rules and a scripted stub).

#include "invmix/backend.hpp"
#include "invmix/datamodel.hpp"
#include "invmix/prompts.hpp"

#include <json.hpp>

#include <atomic>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace invmix {

enum class Intrusion { none, inside, outside };
std::string_view to_string(Intrusion i);
Intrusion intrusion_from_string(std::string_view s);

struct JudgeVerdict {
  std::string sample_id;
  Intrusion intrusion = Intrusion::none;
  /// Class the judge picked; for `none` the soft label's argmax.
  int judged_label = 0;
  std::string raw_response;
};

struct JudgeOptions {
  int retries = 3;
  int threads = 1;
  DecodeConfig decode{DecodeConfig::Mode::greedy, 1.0, 1.0, 16};
  PromptCatalog catalog = PromptCatalog::defaults();
};

/// One `"Name": "description"` line per class.
std::string label_list(const LabelSpace& ls);
/// Classes names joined by ", ".
std::string label_map(const LabelSpace& ls);
/// Non-zero classes by descending mass, e.g. "Location (0.70) and Numeric (0.30)".
std::string label_text(const SoftLabel& y, const LabelSpace& ls);

/// Exact name, then case-insensitive match after trimming whitespace and
/// punctuation, then a unique case-insensitive substring.
std::optional<int> parse_label(std::string_view response, const LabelSpace& ls);
/// "yes"/"no" as the whole normalised response or its first word.
std::optional<bool> parse_yes_no(std::string_view response);

struct LabelOutcome {
  std::optional<int> label;
  std::string raw_response;
  int attempts = 0;
};

LabelOutcome try_judge_label(std::string_view text, const LabelSpace& ls, const DecoderBackend& judge,
                             const JudgeOptions& opts = {});
/// Throws JudgeError when no attempt yields a label name.
int judge_label(std::string_view text, const LabelSpace& ls, const DecoderBackend& judge, const JudgeOptions& opts = {});

/// Two-step protocol: validity of the interpolated label, then, on "No", a
/// forced choice classified against the classes of the two sources (looked
/// up in `task`). Returns nullopt when a step stays unparseable.
std::optional<JudgeVerdict> judge_intrusion(const SyntheticExample& sample, const Corpus& task,
                                            const DecoderBackend& judge, const JudgeOptions& opts = {});

struct IntrusionRun {
  std::vector<JudgeVerdict> verdicts;
  std::vector<double> lambdas;
  int skipped = 0;
};

/// Judges every sample in order; skips are counted, not fatal.
IntrusionRun judge_intrusions(const Corpus& augmented, const Corpus& task, const DecoderBackend& judge,
                              const JudgeOptions& opts = {});

struct IntrusionReport {
  /// "0.5" .. "0.9" or "overall".
  std::string bucket;
  int none = 0, inside = 0, outside = 0;
  int total() const noexcept { return none + inside + outside; }
  double proportion(Intrusion i) const;
};

std::vector<double> default_lambda_buckets();

/// One row per bucket, then an overall row. lambda is folded to
/// max(lambda, 1 - lambda) and assigned to the nearest bucket. Empty input
/// gives an empty report. Throws ShapeError on a length mismatch.
std::vector<IntrusionReport> intrusion_stats(std::span<const JudgeVerdict> verdicts, std::span<const double> lambdas,
                                             std::span<const double> buckets);

struct RelabelResult {
  Corpus corpus;
  int failures = 0;
};

/// Adds judge-assigned hard labels and drops unlabeled samples. Throws
/// JudgeError when more than half fail.
RelabelResult relabel_hard(const Corpus& augmented, const DecoderBackend& judge, const JudgeOptions& opts = {});

std::string verdicts_to_jsonl(std::span<const JudgeVerdict> verdicts, const LabelSpace& ls);
nlohmann::json report_to_json(std::span<const IntrusionReport> report);

/// Answers judge prompts from a keyword lexicon: the label is the class
/// with most keyword hits, and an interpolated label is accepted when the
/// keyword class distribution is within `tolerance` total variation of it.
class KeywordJudge final : public DecoderBackend {
 public:
  KeywordJudge(LabelSpace ls, std::map<std::string, int> lexicon, double tolerance = 0.3);
  std::string id() const override { return "keyword-judge"; }
  unsigned capabilities() const override { return static_cast<unsigned>(Capability::text_completion); }
  std::string complete(const std::vector<std::string>& prompt_parts, const DecodeConfig& cfg) const override;

  /// Keyword hits per class.
  std::vector<int> hits(std::string_view sentence) const;

 private:
  LabelSpace ls_;
  std::map<std::string, int> lexicon_;
  double tolerance_;
};

/// Returns whatever the callback says; counts calls.
class ScriptedJudge final : public DecoderBackend {
 public:
  using Script = std::function<std::string(const std::string& prompt, int call)>;
  explicit ScriptedJudge(Script script) : script_(std::move(script)) {}
  std::string id() const override { return "scripted-judge"; }
  unsigned capabilities() const override { return static_cast<unsigned>(Capability::text_completion); }
  std::string complete(const std::vector<std::string>& prompt_parts, const DecodeConfig& cfg) const override;
  int calls() const noexcept { return calls_.load(); }

 private:
  Script script_;
  mutable std::atomic<int> calls_{0};
};

}  // namespace invmix

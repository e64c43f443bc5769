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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace invmix {

/// Ordered class names with one short description each.
class LabelSpace {
 public:
  LabelSpace() = default;
  /// Throws DomainError unless names are unique, non-empty, K >= 2 and
  /// descriptions has exactly K entries.
  LabelSpace(std::vector<std::string> names, std::vector<std::string> descriptions);

  int size() const noexcept { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<std::string>& descriptions() const noexcept { return descriptions_; }
  const std::string& name(int class_id) const;
  std::optional<int> find(std::string_view name) const;

  /// Built-in spaces: "trec" (6), "agnews" (4), "yahoo" (10), with the
  /// descriptions used in the judge prompts.
  static LabelSpace builtin(std::string_view which);

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<std::string> descriptions_;
};

/// One-hot vector of length K with a 1 at `class_id`.
std::vector<double> to_onehot(int class_id, int K);

struct LabeledExample {
  std::string id;
  std::string text;
  int class_id = 0;
  std::vector<double> onehot;

  static LabeledExample make(std::string id, std::string text, int class_id, int K);
  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

struct TextRecord {
  std::string id;
  std::string text;
  friend bool operator==(const TextRecord&, const TextRecord&) = default;
};

/// Probability vector over K classes.
struct SoftLabel {
  std::vector<double> probs;

  /// Validates entries in [0,1] summing to 1 within 1e-6.
  static SoftLabel from(std::vector<double> probs);
  int size() const noexcept { return static_cast<int>(probs.size()); }
  int argmax() const;
  friend bool operator==(const SoftLabel&, const SoftLabel&) = default;
};

struct SyntheticExample {
  std::string id;
  std::string text;
  SoftLabel soft_label;
  std::optional<int> hard_label;
  double lambda = 0.0;
  std::string source_i;
  std::string source_j;
  friend bool operator==(const SyntheticExample&, const SyntheticExample&) = default;
};

enum class CorpusKind { unlabeled, task, augmented };

std::string_view to_string(CorpusKind kind);
CorpusKind corpus_kind_from_string(std::string_view s);

/// A dataset of one kind. Only the vector matching `kind` is populated.
struct Corpus {
  CorpusKind kind = CorpusKind::task;
  std::optional<LabelSpace> label_space;
  std::vector<TextRecord> unlabeled;
  std::vector<LabeledExample> labeled;
  std::vector<SyntheticExample> synthetic;

  std::size_t size() const noexcept;
  bool empty() const noexcept { return size() == 0; }
  std::vector<std::string> texts() const;
  /// Checks the kind/label invariants; throws DomainError.
  void validate() const;
  const LabeledExample* find_labeled(std::string_view id) const;

  static Corpus make_unlabeled(std::vector<TextRecord> records);
  static Corpus make_task(LabelSpace ls, std::vector<LabeledExample> examples);
  static Corpus make_augmented(LabelSpace ls, std::vector<SyntheticExample> samples);

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Reads a JSONL corpus. Task records are {"text","label"} with labels by
/// name; unlabeled records carry "text" only; augmented records follow the
/// augmented-set schema. An optional "id" overrides the default id (the
/// zero-based record index). Blank lines are skipped but still counted.
Corpus load_corpus(const std::filesystem::path& path, CorpusKind kind,
                   const std::optional<LabelSpace>& label_space = std::nullopt);
Corpus parse_corpus(std::istream& in, CorpusKind kind, const std::optional<LabelSpace>& label_space);

std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

/// Exactly `k_shot` examples per class, chosen by a seeded per-class
/// shuffle; classes in label order, picks in original corpus order.
Corpus sample_few_shot(const Corpus& corpus, int k_shot, std::uint64_t seed);

/// Seeded subset of at most `n` records, original order preserved.
Corpus subsample(const Corpus& corpus, std::size_t n, std::uint64_t seed);

}  // namespace invmix

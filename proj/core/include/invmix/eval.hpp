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

// Evaluation: accuracy, the Wilcoxon signed-rank test, embedding similarity
// structure, and the multi-seed few-shot experiment runner.

#include "invmix/adaptor.hpp"
#include "invmix/datamodel.hpp"
#include "invmix/encoder.hpp"
#include "invmix/judge.hpp"
#include "invmix/mixup.hpp"
#include "invmix/stages.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace invmix {

/// Fraction of exact matches. Throws ShapeError on a length mismatch and
/// DomainError on empty input.
double accuracy(std::span<const int> predictions, std::span<const int> gold);
double accuracy(const TaskModel& model, const Corpus& test);

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;
  double w_minus = 0.0;
  /// Pairs left after dropping zero differences.
  int n = 0;
  bool exact = false;
  /// Every difference was zero; p is 1 by convention.
  bool degenerate = false;
};

/// Two-sided paired test. Zero differences are dropped and tied magnitudes
/// share average ranks. Exact enumeration up to 12 pairs, otherwise the
/// normal approximation with tie and continuity corrections. Throws
/// ShapeError on a length mismatch and DomainError when fewer than 5
/// non-zero differences remain.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

double cosine(const Embedding& a, const Embedding& b);

struct SimilarityStats {
  std::string group;
  int count = 0;
  double mean = 0.0;
  double std = 0.0;
  /// 20 equal bins over [-1, 1].
  std::vector<int> histogram;
  bool omitted = false;
};

struct SimilarityReport {
  SimilarityStats cross_class;
  SimilarityStats same_class;
  SimilarityStats reconstructed;
  std::vector<std::string> warnings;
  nlohmann::json to_json() const;
};

/// Cosine statistics for cross-class original pairs, same-class original
/// pairs, and each original against its own reconstruction.
SimilarityReport similarity_distributions(const Corpus& originals, std::span<const std::string> reconstructions,
                                          const TaskModel& theta);

enum class Method { base, soft, hard };
std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

struct RunResult {
  std::string method;
  std::string dataset;
  /// Shots per class; 0 means the whole pool ("all").
  int k_shot = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accs;
  double mean = 0.0;
  /// Sample standard deviation (n - 1); 0 for a single seed.
  double std = 0.0;
  void finalize();
  nlohmann::json to_json() const;
};

struct ExperimentSpec {
  std::string dataset = "toy";
  std::vector<Method> methods{Method::base, Method::soft};
  int k_shot = 1;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  /// Final classifier training. Base runs also get the refinement's
  /// classifier epochs so every method sees the same number of epochs on
  /// the few-shot split.
  ClassifierSchedule classifier;
  RefineConfig refine;
  MixConfig mix;
  JudgeOptions judge;
};

struct ExperimentInputs {
  const Corpus& pool;
  const Corpus& test;
  const TaskModel& theta0;
  const Adaptor& phi_star;
  const DecoderBackend& backend;
  const PromptTemplate& tmpl;
  /// Needed only for Method::hard.
  const DecoderBackend* judge = nullptr;
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  nlohmann::json to_json() const;
};

/// Runs every method for every seed. When `partial` is set, results so far
/// are written there after each seed, so an aborted run keeps them.
ExperimentResult run_experiment(const ExperimentSpec& spec, const ExperimentInputs& in,
                                const std::optional<std::filesystem::path>& partial = std::nullopt);

/// Pairwise Wilcoxon p-values between runs; null where the test is undefined.
nlohmann::json comparison_table(std::span<const RunResult> runs);

struct LambdaRow {
  double lambda = 0.0;
  RunResult soft;
  RunResult hard;
  std::optional<WilcoxonResult> test;
};

/// Soft versus judge-relabelled hard labels at fixed mixing ratios.
std::vector<LambdaRow> run_lambda_grid(const ExperimentSpec& spec, const ExperimentInputs& in,
                                       std::span<const double> grid);
nlohmann::json lambda_table(std::span<const LambdaRow> rows);

}  // namespace invmix

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

// Stage 3: convex mixing of embedding pairs and their labels, inversion of
// the mixed embeddings, and assembly of the augmented set.

#include "invmix/adaptor.hpp"
#include "invmix/backend.hpp"
#include "invmix/datamodel.hpp"
#include "invmix/encoder.hpp"
#include "invmix/prompts.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace invmix {

/// Draws from Beta(alpha, alpha). Throws DomainError for alpha <= 0.
double sample_lambda(double alpha, std::mt19937_64& rng);

struct MixedEmbedding {
  Embedding h_tilde;
  double lambda = 0.0;
  std::string source_i;
  std::string source_j;
};

/// lambda * h_i + (1 - lambda) * h_j. Throws ShapeError on a length mismatch
/// and DomainError for lambda outside [0, 1].
MixedEmbedding mix_embeddings(const Embedding& h_i, const Embedding& h_j, double lambda, std::string source_i = {},
                              std::string source_j = {});

/// lambda * y_i + (1 - lambda) * y_j.
SoftLabel mix_labels(std::span<const double> y_i, std::span<const double> y_j, double lambda);

enum class PairPolicy { uniform_pairs, cross_class_only };
std::string_view to_string(PairPolicy p);
PairPolicy pair_policy_from_string(std::string_view s);

struct MixConfig {
  double alpha = 0.4;
  std::optional<double> fixed_lambda;
  int num_samples = 60;
  PairPolicy pair_policy = PairPolicy::uniform_pairs;
  DecodeConfig decode{};
  int retries = 3;
  int threads = 1;
  std::uint64_t seed = 0;
  /// Throws DomainError on an invalid field.
  void validate() const;
};

struct MixResult {
  Corpus augmented;
  int skipped = 0;
  std::vector<std::string> warnings;
};

/// Exactly num_samples records unless some pairs fail to generate, in which
/// case they are skipped and counted. Each sample uses its own RNG derived
/// from (seed, sample index), so results do not depend on `threads`.
/// Throws GenerationError when every sample fails.
MixResult generate_augmented_set(const Corpus& task, const TaskModel& theta, const Adaptor& phi,
                                 const DecoderBackend& backend, const PromptTemplate& tmpl, const MixConfig& cfg);

/// Original task examples followed by the synthetic ones, as training items.
std::vector<TrainingItem> union_items(const Corpus& task, const Corpus& augmented, LabelMode mode);

}  // namespace invmix

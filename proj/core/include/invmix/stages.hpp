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

// Stage 1 aligns the adaptor to the frozen decoder on unlabeled text with the
// task encoder frozen. Stage 2 alternates classifier training (adaptor frozen)
// with adaptor re-alignment against the current encoder.

#include "invmix/adaptor.hpp"
#include "invmix/backend.hpp"
#include "invmix/datamodel.hpp"
#include "invmix/encoder.hpp"
#include "invmix/errors.hpp"
#include "invmix/prompts.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace invmix {

struct AlignConfig {
  int epochs = 10;
  int batch_size = 8;
  AdamConfig adam{};
  std::uint64_t seed = 0;
  /// Abort once the epoch loss exceeds factor x initial for `patience` epochs.
  double divergence_factor = 10.0;
  int divergence_patience = 2;
};

struct RefineSchedule {
  int outer_rounds = 3;
  int cls_epochs_per_round = 1;
  int gen_epochs_per_round = 1;
  /// Throws DomainError unless outer_rounds >= 1 and epoch counts >= 0.
  void validate() const;
};

struct RefineConfig {
  RefineSchedule schedule;
  /// `epochs` is ignored; the schedule decides.
  ClassifierSchedule cls;
  /// `epochs` is ignored; the schedule decides.
  AlignConfig gen;
};

enum class StageKind { align, refine };
std::string_view to_string(StageKind s);

/// Parameter checksums around one training phase.
struct PhaseRecord {
  std::string phase;  // "align", "cls" or "gen"
  int round = 0;
  std::uint64_t theta_before = 0, theta_after = 0;
  std::uint64_t phi_before = 0, phi_after = 0;
  std::uint64_t psi_before = 0, psi_after = 0;
};

struct StageReport {
  StageKind stage = StageKind::align;
  /// Mean per-sentence training loss for every epoch run, in order.
  std::vector<double> gen_loss;
  std::vector<double> cls_loss;
  /// Evaluation-mode mean gen_loss before training and after it.
  double initial_gen_loss = 0.0;
  double final_gen_loss = 0.0;
  /// Refine only: gen_loss over the task set right after each classifier
  /// phase, before the adaptor catches up.
  std::vector<double> drift_gen_loss;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::vector<PhaseRecord> phases;
  std::vector<std::string> checkpoints;
  std::string abort_reason;

  nlohmann::json to_json() const;
};

/// Training failure that still carries the partial report.
class StageAborted : public TrainingError {
 public:
  StageAborted(const std::string& what, StageReport report) : TrainingError(what), report_(std::move(report)) {}
  const StageReport& report() const noexcept { return report_; }

 private:
  StageReport report_;
};

/// Mean evaluation-mode gen_loss of `texts` under (theta, phi).
double mean_gen_loss(std::span<const std::string> texts, const TaskModel& theta, const Adaptor& phi,
                     const DecoderBackend& backend, const PromptTemplate& tmpl);

struct AlignResult {
  Adaptor phi;
  StageReport report;
};

/// Updates only the adaptor. Throws DomainError for a non-unlabeled corpus
/// and StageAborted on divergence or a non-finite loss.
AlignResult align_adaptor(const Corpus& unlabeled, const TaskModel& theta, Adaptor phi, const DecoderBackend& backend,
                          const PromptTemplate& tmpl, const AlignConfig& cfg);

struct RefineResult {
  TaskModel theta;
  Adaptor phi;
  StageReport report;
};

RefineResult refine(const Corpus& task, TaskModel theta, Adaptor phi, const DecoderBackend& backend,
                    const PromptTemplate& tmpl, const RefineConfig& cfg);

}  // namespace invmix

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

// Command-line front end. Each subcommand loads its inputs from the output
// directory, runs one stage and writes its artifacts atomically.

#include "invmix/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace invmix {

enum ExitCode : int { kExitOk = 0, kExitStageFailure = 1, kExitConfigError = 2 };

/// Fixed artifact names under the output directory.
namespace artifacts {
inline constexpr const char* kTheta0 = "checkpoints/theta0.json";
inline constexpr const char* kDecoder = "checkpoints/decoder.json";
inline constexpr const char* kAdaptorAligned = "checkpoints/adaptor_align.json";
inline constexpr const char* kThetaRefined = "checkpoints/theta_refined.json";
inline constexpr const char* kAdaptorRefined = "checkpoints/adaptor_refined.json";
inline constexpr const char* kAdaptorFeedback = "checkpoints/adaptor_feedback.json";
inline constexpr const char* kSplit = "augmented/split.jsonl";
inline constexpr const char* kAugmented = "augmented/augmented.jsonl";
inline constexpr const char* kAugmentedHard = "augmented/augmented_hard.jsonl";
}  // namespace artifacts

/// Runs one subcommand against a parsed configuration. Throws on failure.
void dispatch(const std::string& subcommand, const RunConfig& cfg, std::ostream& log);

/// Full CLI: parses argv, applies overrides, dispatches, maps errors to
/// exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Subcommands in pipeline order.
const std::vector<std::string>& subcommands();

}  // namespace invmix

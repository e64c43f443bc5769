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

// A synthetic three-class news domain. Every sentence fills one of a set of
// shared templates with two keywords of a single class, so the class is
// decided by vocabulary alone and the template carries no signal.

#include "invmix/datamodel.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace invmix::toy {

LabelSpace labels();

/// Keywords per class, in label order.
const std::vector<std::vector<std::string>>& keywords();
const std::vector<std::string>& templates();

/// keyword -> class id.
std::map<std::string, int> lexicon();

struct ToyConfig {
  int n_unlabeled = 240;
  int n_task = 90;
  int n_test = 150;
  std::uint64_t seed = 7;
};

struct ToyData {
  Corpus unlabeled;
  Corpus task;
  Corpus test;
};

/// Disjoint, duplicate-free splits; task and test are class-balanced.
ToyData make(const ToyConfig& cfg);

/// `n` distinct unlabeled sentences.
Corpus make_unlabeled(int n, std::uint64_t seed);

}  // namespace invmix::toy

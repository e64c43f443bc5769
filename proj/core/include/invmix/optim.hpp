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

#include "invmix/autograd.hpp"

#include <vector>

namespace invmix {

struct AdamConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; <= 0 disables.
  double clip_norm = 0.0;
};

/// Adam over a fixed list of parameters. Moments are kept per parameter in
/// registration order.
class Adam {
 public:
  Adam(std::vector<ag::Parameter*> params, AdamConfig cfg);

  void zero_grad();
  /// Applies one update using the accumulated gradients scaled by `grad_scale`.
  void step(double grad_scale = 1.0);

  const AdamConfig& config() const noexcept { return cfg_; }
  long steps() const noexcept { return t_; }

 private:
  std::vector<ag::Parameter*> params_;
  std::vector<ag::Matrix> m_;
  std::vector<ag::Matrix> v_;
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace invmix

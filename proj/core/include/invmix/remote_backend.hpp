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

// Client for a chat-style text-completion service. It can only complete
// text prompts: no log-probabilities and no soft-token injection, so it
// serves as a judge or text generator but never for adaptor training.

#include "invmix/backend.hpp"

#include <chrono>
#include <memory>
#include <string>

namespace invmix {

struct RemoteConfig {
  /// e.g. "http://localhost:8080" or "https://api.example.com".
  std::string base_url;
  std::string path = "/v1/complete";
  std::string model = "remote";
  /// Name of the environment variable holding the bearer token.
  std::string token_env = "INVMIX_API_TOKEN";
  int max_in_flight = 4;
  int retries = 3;
  std::chrono::milliseconds backoff{200};
  std::chrono::seconds timeout{60};
};

class RemoteBackend final : public DecoderBackend {
 public:
  /// Reads the token from the environment; an unset variable means no
  /// Authorization header.
  explicit RemoteBackend(RemoteConfig cfg);
  ~RemoteBackend() override;
  RemoteBackend(const RemoteBackend&) = delete;
  RemoteBackend& operator=(const RemoteBackend&) = delete;

  std::string id() const override { return "remote:" + cfg_.model; }
  unsigned capabilities() const override { return static_cast<unsigned>(Capability::text_completion); }

  /// POSTs {prompt_parts, max_new_tokens, temperature, top_p} and returns the
  /// response's "text". Retries 429/5xx and transport errors with
  /// exponential backoff; throws BackendError when attempts run out.
  std::string complete(const std::vector<std::string>& prompt_parts, const DecodeConfig& cfg) const override;

  const RemoteConfig& config() const noexcept { return cfg_; }
  bool has_token() const noexcept { return !token_.empty(); }

 private:
  struct Impl;
  RemoteConfig cfg_;
  std::string token_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace invmix

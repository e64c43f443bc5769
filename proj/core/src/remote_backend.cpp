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
#include "invmix/remote_backend.hpp"

#include "invmix/errors.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <semaphore>
#include <thread>

namespace invmix {

using nlohmann::json;

struct RemoteBackend::Impl {
  explicit Impl(int slots) : in_flight(slots) {}
  std::counting_semaphore<1024> in_flight;
};

RemoteBackend::RemoteBackend(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.base_url.empty()) throw ConfigError("remote backend needs a base URL");
  if (cfg_.max_in_flight < 1 || cfg_.max_in_flight > 1024) throw ConfigError("remote max_in_flight must be in [1, 1024]");
  if (cfg_.retries < 1) throw ConfigError("remote retries must be >= 1");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (cfg_.base_url.rfind("https://", 0) == 0) throw ConfigError("this build has no TLS support for " + cfg_.base_url);
#endif
  if (const char* t = std::getenv(cfg_.token_env.c_str())) token_ = t;
  impl_ = std::make_unique<Impl>(cfg_.max_in_flight);
}

RemoteBackend::~RemoteBackend() = default;

std::string RemoteBackend::complete(const std::vector<std::string>& prompt_parts, const DecodeConfig& cfg) const {
  const json body{{"prompt_parts", prompt_parts},
                  {"max_new_tokens", cfg.max_new_tokens},
                  {"temperature", cfg.mode == DecodeConfig::Mode::greedy ? 0.0 : cfg.temperature},
                  {"top_p", cfg.top_p}};
  const std::string payload = body.dump();
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

  std::string last;
  auto delay = cfg_.backoff;
  for (int attempt = 0; attempt < cfg_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Result res;
    {
      impl_->in_flight.acquire();
      struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
      } release{impl_->in_flight};
      httplib::Client client(cfg_.base_url);
      client.set_connection_timeout(cfg_.timeout);
      client.set_read_timeout(cfg_.timeout);
      res = client.Post(cfg_.path, headers, payload, "application/json");
    }
    if (!res) {
      last = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw BackendError(id() + " rejected the request: HTTP " + std::to_string(res->status) + " " + res->body);
    }
    try {
      return json::parse(res->body).at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw BackendError(id() + " returned a malformed response: " + std::string(e.what()));
    }
  }
  throw BackendError(id() + " failed after " + std::to_string(cfg_.retries) + " attempts: " + last);
}

}  // namespace invmix

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
#include "invmix/adaptor.hpp"
#include "invmix/errors.hpp"
#include "invmix/judge.hpp"
#include "invmix/remote_backend.hpp"
#include "test_support.hpp"

#include <httplib.h>
#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

namespace invmix {
namespace {

using nlohmann::json;

// A local completion service with scripted failure modes.
class FakeService {
 public:
  FakeService() {
    server_.Post("/v1/complete", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls_;
      auth_ = req.get_header_value("Authorization");
      body_ = json::parse(req.body);
      res.set_content(json{{"text", "Location"}}.dump(), "application/json");
    });
    server_.Post("/flaky", [this](const httplib::Request&, httplib::Response& res) {
      if (++calls_ <= 2) {
        res.status = calls_ == 1 ? 503 : 429;
        return;
      }
      res.set_content(R"({"text": "Yes"})", "application/json");
    });
    server_.Post("/down", [this](const httplib::Request&, httplib::Response& res) {
      ++calls_;
      res.status = 500;
    });
    server_.Post("/bad", [this](const httplib::Request&, httplib::Response& res) {
      ++calls_;
      res.status = 400;
      res.set_content("no", "text/plain");
    });
    server_.Post("/garbage", [this](const httplib::Request&, httplib::Response& res) {
      ++calls_;
      res.set_content("<html>", "text/html");
    });
    server_.Post("/slow", [this](const httplib::Request&, httplib::Response& res) {
      const int now = ++active_;
      int seen = peak_.load();
      while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      --active_;
      res.set_content(R"({"text": "ok"})", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeService() {
    server_.stop();
    thread_.join();
  }

  RemoteConfig config(const std::string& path) const {
    RemoteConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_);
    c.path = path;
    c.token_env = "INVMIX_TEST_REMOTE_TOKEN";
    c.backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::seconds(5);
    return c;
  }

  std::atomic<int> calls_{0};
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
  std::string auth_;
  json body_;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(Remote, SendsSchemaAndBearerToken) {
  FakeService svc;
  ::setenv("INVMIX_TEST_REMOTE_TOKEN", "s3cret", 1);
  const RemoteBackend b(svc.config("/v1/complete"));
  ::unsetenv("INVMIX_TEST_REMOTE_TOKEN");
  EXPECT_TRUE(b.has_token());
  EXPECT_EQ(b.complete({"a", "b"}, {DecodeConfig::Mode::sample, 0.7, 0.9, 12}), "Location");
  EXPECT_EQ(svc.auth_, "Bearer s3cret");
  EXPECT_EQ(svc.body_.at("prompt_parts"), (json{"a", "b"}));
  EXPECT_EQ(svc.body_.at("max_new_tokens"), 12);
  EXPECT_DOUBLE_EQ(svc.body_.at("temperature").get<double>(), 0.7);
  EXPECT_DOUBLE_EQ(svc.body_.at("top_p").get<double>(), 0.9);
  b.complete({"x"}, {DecodeConfig::Mode::greedy, 0.7, 1.0, 4});
  EXPECT_EQ(svc.body_.at("temperature"), 0.0);
}

TEST(Remote, NoTokenNoHeader) {
  FakeService svc;
  ::unsetenv("INVMIX_TEST_REMOTE_TOKEN");
  const RemoteBackend b(svc.config("/v1/complete"));
  EXPECT_FALSE(b.has_token());
  b.complete({"x"}, {});
  EXPECT_TRUE(svc.auth_.empty());
}

TEST(Remote, DefaultTokenVariable) { EXPECT_EQ(RemoteConfig{}.token_env, "INVMIX_API_TOKEN"); }

TEST(Remote, RetriesTransientStatuses) {
  FakeService svc;
  const RemoteBackend b(svc.config("/flaky"));
  EXPECT_EQ(b.complete({"x"}, {}), "Yes");
  EXPECT_EQ(svc.calls_.load(), 3);
}

TEST(Remote, GivesUpAfterRetries) {
  FakeService svc;
  RemoteConfig c = svc.config("/down");
  c.retries = 4;
  const RemoteBackend b(c);
  EXPECT_THROW(b.complete({"x"}, {}), BackendError);
  EXPECT_EQ(svc.calls_.load(), 4);
}

TEST(Remote, ClientErrorsAreNotRetried) {
  FakeService svc;
  const RemoteBackend b(svc.config("/bad"));
  EXPECT_THROW(b.complete({"x"}, {}), BackendError);
  EXPECT_EQ(svc.calls_.load(), 1);
  const RemoteBackend g(svc.config("/garbage"));
  EXPECT_THROW(g.complete({"x"}, {}), BackendError);
}

TEST(Remote, UnreachableIsBackendError) {
  RemoteConfig c;
  c.base_url = "http://127.0.0.1:1";
  c.retries = 2;
  c.backoff = std::chrono::milliseconds(1);
  c.timeout = std::chrono::seconds(1);
  EXPECT_THROW(RemoteBackend(c).complete({"x"}, {}), BackendError);
}

TEST(Remote, BoundsRequestsInFlight) {
  FakeService svc;
  RemoteConfig c = svc.config("/slow");
  c.max_in_flight = 2;
  const RemoteBackend b(c);
  std::vector<std::jthread> pool;
  for (int i = 0; i < 8; ++i) pool.emplace_back([&] { b.complete({"x"}, {}); });
  pool.clear();
  EXPECT_LE(svc.peak_.load(), 2);
  EXPECT_GE(svc.peak_.load(), 1);
}

TEST(Remote, CannotInvertOrScore) {
  FakeService svc;
  const RemoteBackend b(svc.config("/v1/complete"));
  EXPECT_FALSE(b.has(Capability::embedding_injection));
  EXPECT_FALSE(b.has(Capability::teacher_forced_logprob));
  const Adaptor phi(AdaptorConfig{4, 4});
  std::mt19937_64 rng(1);
  EXPECT_THROW(invert(Embedding::Zero(4), phi, b, test::inversion_template(), {}, rng), CapabilityError);
  SoftPrompt p;
  p.soft_vectors = ag::Matrix::Zero(1, 4);
  p.target_tokens = {Vocabulary::kEos};
  EXPECT_THROW(gen_loss(p, b), CapabilityError);
  EXPECT_EQ(svc.calls_.load(), 0);
}

TEST(Remote, ServesAsJudge) {
  FakeService svc;
  const RemoteBackend b(svc.config("/v1/complete"));
  EXPECT_EQ(judge_label("where is it", LabelSpace::builtin("trec"), b), *LabelSpace::builtin("trec").find("Location"));
}

TEST(Remote, RejectsBadConfig) {
  EXPECT_THROW(RemoteBackend(RemoteConfig{}), ConfigError);
  RemoteConfig c;
  c.base_url = "http://localhost";
  c.max_in_flight = 0;
  EXPECT_THROW(RemoteBackend{c}, ConfigError);
}

}  // namespace
}  // namespace invmix

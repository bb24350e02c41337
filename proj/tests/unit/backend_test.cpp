// Copyright 2026 The FinRAG Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "finrag/backend.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <set>
#include <thread>

#include "generators.hpp"
#include "json.hpp"
#include "stub_server.hpp"
#include "test_paths.hpp"

namespace finrag {
namespace {

using namespace std::chrono_literals;

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

const char* kInstr = "What is the sentiment of this news? Please choose an answer from "
                     "{negative/neutral/positive}.";

CompletionParams FastParams() {
  CompletionParams p;
  p.timeout = 2000ms;
  p.initial_backoff = 1ms;
  p.max_backoff = 5ms;
  return p;
}

std::string ChatReply(const std::string& text) {
  nlohmann::json j = {{"choices", {{{"message", {{"content", text}}}}}}};
  return j.dump();
}

TEST(PromptEnvelopeTest, RendersHumanAssistantForm) {
  auto env = PromptEnvelope::Make("Classify.", "Stocks rally");
  EXPECT_EQ(env.rendered, "Human: Classify. Stocks rally, Assistant:");
  EXPECT_TRUE(env.rendered.ends_with(kOpenAssistantSuffix));
}

TEST(CompletionParamsTest, Validate) {
  CompletionParams p;
  EXPECT_NO_THROW(p.Validate());
  p.temperature = -0.1;
  EXPECT_EQ(CodeOf([&] { p.Validate(); }), ErrorCode::kInvalidArgument);
  p.temperature = 0.0;
  p.max_tokens = 0;
  EXPECT_EQ(CodeOf([&] { p.Validate(); }), ErrorCode::kInvalidArgument);
}

TEST(BackoffTest, DoublesAndCaps) {
  CompletionParams p;
  EXPECT_EQ(BackoffDelay(p, 0), 200ms);
  EXPECT_EQ(BackoffDelay(p, 1), 400ms);
  EXPECT_EQ(BackoffDelay(p, 4), 3200ms);
  EXPECT_EQ(BackoffDelay(p, 5), 5000ms);
  EXPECT_EQ(BackoffDelay(p, 200), 5000ms);
}

TEST(BackoffTest, MonotoneForRandomParams) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    CompletionParams p;
    p.initial_backoff = std::chrono::milliseconds(1 + rng.Below(1000));
    p.max_backoff = std::chrono::milliseconds(rng.Below(20000));
    auto prev = BackoffDelay(p, 0);
    for (std::size_t r = 1; r < 80; ++r) {
      auto cur = BackoffDelay(p, r);
      EXPECT_GE(cur, prev);
      EXPECT_LE(cur, std::max(p.max_backoff, p.initial_backoff));
      prev = cur;
    }
  }
}

TEST(MockBackendTest, CueMajority) {
  MockBackend mock;
  CompletionParams p;
  auto run = [&](const char* text) {
    return mock.Complete(PromptEnvelope::Make(kInstr, text), p);
  };
  EXPECT_EQ(run("Analysts upgrade the stock after earnings beat"), "positive");
  EXPECT_EQ(run("Broker downgrade follows revenue miss"), "negative");
  EXPECT_EQ(run("Company holds annual meeting"), "neutral");
  EXPECT_EQ(run("Upgrade then downgrade"), "neutral");
  EXPECT_EQ(run("UPGRADE"), "positive");
  EXPECT_EQ(run("upgrades"), "neutral");  // whole tokens only
}

TEST(MockBackendTest, PureFunctionOfPrompt) {
  MockBackend mock;
  Rng rng(99);
  const std::set<std::string> allowed = {"positive", "negative", "neutral"};
  const char* words[] = {"beat", "miss", "cuts", "hikes", "flat", "Outperform",
                         "underweight", "news"};
  for (int i = 0; i < 1000; ++i) {
    std::string text = gen::Utf8String(rng, 40);
    for (std::size_t k = rng.Below(4); k > 0; --k) {
      text += std::string(" ") + words[rng.Below(8)];
    }
    auto env = PromptEnvelope::Make(kInstr, text);
    CompletionParams p;
    auto first = mock.Complete(env, p);
    p.temperature = 1.5;
    p.max_tokens = 1 + rng.Below(50);
    EXPECT_EQ(mock.Complete(env, p), first);
    EXPECT_TRUE(allowed.contains(first)) << first;
  }
}

TEST(MockBackendTest, CueTableFromJson) {
  auto table = MockBackend::CueTable::FromJson(ReadFile(testing::FixturePath("mock_cues.json")));
  auto def = MockBackend::CueTable::Default();
  EXPECT_EQ(table.positive, def.positive);
  EXPECT_EQ(table.negative, def.negative);
  MockBackend custom(MockBackend::CueTable::FromJson(R"({"positive":["Moon"],"negative":[]})"));
  EXPECT_EQ(custom.Classify("to the moon"), "positive");
  EXPECT_EQ(CodeOf([] { MockBackend::CueTable::FromJson("{}"); }), ErrorCode::kConfigError);
}

TEST(ChatRequestBodyTest, Shape) {
  HttpBackendConfig config;
  config.model_name = "m";
  CompletionParams p;
  auto body = nlohmann::json::parse(
      ChatRequestBody(PromptEnvelope::Make("Sys.", "User text"), config, p));
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][0]["content"], "Sys.");
  EXPECT_EQ(body["messages"][1]["role"], "user");
  EXPECT_EQ(body["messages"][1]["content"], "User text");
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(body["max_tokens"], 8);
}

TEST(HttpBackendTest, MissingCredentialFailsBeforeAnyRequest) {
  ::unsetenv("FINRAG_TEST_NO_SUCH_KEY");
  HttpBackendConfig config;
  config.endpoint = "http://127.0.0.1:1/v1/chat";
  config.credential_env = "FINRAG_TEST_NO_SUCH_KEY";
  EXPECT_EQ(CodeOf([&] { HttpBackend backend(config); }), ErrorCode::kAuthFailure);
}

TEST(HttpBackendTest, RetriesAfterRateLimit) {
  testing::StubServer stub;
  std::atomic<int> hits{0};
  std::string auth;
  stub.server().Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    if (hits++ == 0) {
      res.status = 429;
      res.set_header("Retry-After", "0");
      return;
    }
    res.set_content(ChatReply("positive"), "application/json");
  });
  stub.Start();
  ::setenv("FINRAG_TEST_CHAT_KEY", "k123", 1);
  HttpBackendConfig config;
  config.endpoint = stub.Url("/v1/chat");
  config.credential_env = "FINRAG_TEST_CHAT_KEY";
  HttpBackend backend(config);
  EXPECT_EQ(backend.Complete(PromptEnvelope::Make(kInstr, "x"), FastParams()), "positive");
  EXPECT_EQ(backend.requests(), 2u);
  EXPECT_EQ(backend.retries(), 1u);
  EXPECT_EQ(auth, "Bearer k123");
}

TEST(HttpBackendTest, StatusMapping) {
  testing::StubServer stub;
  std::atomic<int> server_errors{0};
  stub.server().Post("/down", [&](const httplib::Request&, httplib::Response& res) {
    ++server_errors;
    res.status = 503;
  });
  stub.server().Post("/bad", [](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
  });
  stub.server().Post("/auth", [](const httplib::Request&, httplib::Response& res) {
    res.status = 401;
  });
  stub.server().Post("/garbled", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[]})", "application/json");
  });
  stub.Start();
  auto backend_for = [&](const char* path) {
    HttpBackendConfig config;
    config.endpoint = stub.Url(path);
    return std::make_unique<HttpBackend>(config);
  };
  auto env = PromptEnvelope::Make(kInstr, "x");
  auto params = FastParams();
  params.max_retries = 2;

  auto down = backend_for("/down");
  EXPECT_EQ(CodeOf([&] { down->Complete(env, params); }), ErrorCode::kBackendUnavailable);
  EXPECT_EQ(server_errors.load(), 3);
  EXPECT_EQ(down->requests(), 3u);

  auto bad = backend_for("/bad");
  EXPECT_EQ(CodeOf([&] { bad->Complete(env, params); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(bad->requests(), 1u);

  auto auth = backend_for("/auth");
  EXPECT_EQ(CodeOf([&] { auth->Complete(env, params); }), ErrorCode::kAuthFailure);
  EXPECT_EQ(auth->requests(), 1u);

  auto garbled = backend_for("/garbled");
  EXPECT_EQ(CodeOf([&] { garbled->Complete(env, params); }), ErrorCode::kMalformedResponse);
}

TEST(HttpBackendTest, ConnectionRefusedIsRetriedThenReported) {
  HttpBackendConfig config;
  config.endpoint = "http://127.0.0.1:1/v1/chat";
  HttpBackend backend(config);
  auto params = FastParams();
  params.max_retries = 1;
  auto code = CodeOf([&] { backend.Complete(PromptEnvelope::Make(kInstr, "x"), params); });
  EXPECT_TRUE(code == ErrorCode::kBackendUnavailable || code == ErrorCode::kTimeout);
  EXPECT_EQ(backend.requests(), 2u);
}

TEST(CompleteBatchTest, MaxInFlightBoundsConcurrency) {
  testing::StubServer stub;
  std::atomic<int> active{0}, peak{0};
  stub.server().Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    int now = ++active;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {}
    std::this_thread::sleep_for(20ms);
    --active;
    auto body = nlohmann::json::parse(req.body);
    res.set_content(ChatReply(body["messages"][1]["content"]), "application/json");
  });
  stub.Start();
  HttpBackendConfig config;
  config.endpoint = stub.Url("/v1/chat");
  HttpBackend backend(config);
  std::vector<PromptEnvelope> envs;
  for (int i = 0; i < 8; ++i) envs.push_back(PromptEnvelope::Make(kInstr, "item " + std::to_string(i)));

  auto sequential = CompleteBatch(envs, backend, FastParams(), 1);
  EXPECT_EQ(peak.load(), 1);
  for (int i = 0; i < 8; ++i) {
    ASSERT_TRUE(sequential[i].ok());
    EXPECT_EQ(sequential[i].text, "item " + std::to_string(i));
  }
  peak = 0;
  auto parallel = CompleteBatch(envs, backend, FastParams(), 3);
  EXPECT_LE(peak.load(), 3);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(parallel[i].text, sequential[i].text);
  EXPECT_EQ(CodeOf([&] { CompleteBatch(envs, backend, FastParams(), 0); }),
            ErrorCode::kInvalidArgument);
}

TEST(CompleteBatchTest, OneTimeoutDoesNotAffectOthers) {
  testing::StubServer stub;
  stub.server().Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    if (req.body.find("slow") != std::string::npos) std::this_thread::sleep_for(1500ms);
    res.set_content(ChatReply("neutral"), "application/json");
  });
  stub.Start();
  HttpBackendConfig config;
  config.endpoint = stub.Url("/v1/chat");
  HttpBackend backend(config);
  std::vector<PromptEnvelope> envs;
  for (int i = 0; i < 10; ++i) {
    envs.push_back(PromptEnvelope::Make(kInstr, i == 6 ? "slow one" : "fast"));
  }
  auto params = FastParams();
  params.timeout = 300ms;
  params.max_retries = 0;
  auto results = CompleteBatch(envs, backend, params, 4);
  for (int i = 0; i < 10; ++i) {
    if (i == 6) {
      ASSERT_FALSE(results[i].ok());
      EXPECT_EQ(*results[i].error, ErrorCode::kTimeout);
    } else {
      ASSERT_TRUE(results[i].ok()) << results[i].error_message;
      EXPECT_EQ(results[i].text, "neutral");
    }
  }
}

TEST(MakeBackendTest, KindsAndMissingFields) {
  EXPECT_EQ(ParseBackendKind("toy"), BackendKind::kToy);
  EXPECT_FALSE(ParseBackendKind("gpt"));
  EXPECT_EQ(BackendKindName(BackendKind::kHttp), "http");
  BackendConfig mock;
  EXPECT_EQ(MakeBackend(mock)->name(), "mock");
  BackendConfig toy;
  toy.kind = BackendKind::kToy;
  EXPECT_EQ(CodeOf([&] { MakeBackend(toy); }), ErrorCode::kConfigError);
  BackendConfig http;
  http.kind = BackendKind::kHttp;
  EXPECT_EQ(CodeOf([&] { MakeBackend(http); }), ErrorCode::kConfigError);
}

TEST(ToyBackendTest, RejectsMismatchedVocabulary) {
  Vocab vocab;
  ToyLMParams params(ModelShape{vocab.size() + 1, 2, 2});
  ToyBackend ok(params, vocab);
  EXPECT_EQ(ok.name(), "toy");
  ToyLMParams wrong(ModelShape{vocab.size() + 5, 2, 2});
  EXPECT_EQ(CodeOf([&] { ToyBackend bad(wrong, vocab); }), ErrorCode::kShapeMismatch);
}

}  // namespace
}  // namespace finrag

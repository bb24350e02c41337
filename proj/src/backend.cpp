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

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "finrag/dataset_formatter.hpp"
#include "finrag/lexical.hpp"
#include "http_util.hpp"
#include "json.hpp"

namespace finrag {

PromptEnvelope PromptEnvelope::Make(std::string_view instruction,
                                    std::string_view content) {
  PromptEnvelope e;
  e.instruction = std::string(instruction);
  e.content = std::string(content);
  e.rendered.append(kHumanPrefix);
  e.rendered.append(instruction);
  e.rendered.push_back(' ');
  e.rendered.append(content);
  e.rendered.append(kOpenAssistantSuffix);
  return e;
}

void CompletionParams::Validate() const {
  if (!(temperature >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be >= 0");
  }
  if (max_tokens == 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_tokens must be >= 1");
  }
}

std::chrono::milliseconds BackoffDelay(const CompletionParams& params,
                                       std::size_t retry) {
  auto delay = params.initial_backoff;
  for (std::size_t i = 0; i < retry && delay < params.max_backoff; ++i) {
    delay *= 2;
  }
  return std::min(delay, params.max_backoff);
}

// ---------------------------------------------------------------------------
// Mock

MockBackend::CueTable MockBackend::CueTable::Default() {
  return {{"upgrade", "beat", "hikes", "outperform"},
          {"downgrade", "miss", "cuts", "underweight"}};
}

MockBackend::CueTable MockBackend::CueTable::FromJson(std::string_view text) {
  try {
    auto doc = nlohmann::json::parse(text);
    CueTable table;
    table.positive = doc.at("positive").get<std::vector<std::string>>();
    table.negative = doc.at("negative").get<std::vector<std::string>>();
    for (auto* list : {&table.positive, &table.negative}) {
      for (auto& cue : *list) cue = AsciiLower(cue);
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("cue table: ") + e.what());
  }
}

MockBackend::MockBackend(CueTable cues) : cues_(std::move(cues)) {}

std::string MockBackend::Classify(std::string_view text) const {
  auto tokens = LexicalTokenSequence(text);
  std::size_t pos = 0, neg = 0;
  for (const auto& t : tokens) {
    if (std::find(cues_.positive.begin(), cues_.positive.end(), t) !=
        cues_.positive.end()) {
      ++pos;
    }
    if (std::find(cues_.negative.begin(), cues_.negative.end(), t) !=
        cues_.negative.end()) {
      ++neg;
    }
  }
  if (pos > neg) return "positive";
  if (neg > pos) return "negative";
  return "neutral";
}

std::string MockBackend::Complete(const PromptEnvelope& envelope,
                                  const CompletionParams& params) {
  params.Validate();
  return Classify(envelope.rendered);
}

// ---------------------------------------------------------------------------
// Toy

ToyBackend::ToyBackend(ToyLMParams params, Vocab vocab)
    : params_(std::move(params)), vocab_(std::move(vocab)) {
  if (params_.shape().vocab_size != vocab_.size() + 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "checkpoint vocab_size does not match the tokenizer");
  }
}

std::unique_ptr<ToyBackend> ToyBackend::Load(const std::string& checkpoint_path,
                                             const std::string& vocab_path) {
  Checkpoint ckpt = LoadCheckpoint(checkpoint_path);
  Vocab vocab = Vocab::FromJson(ReadFile(vocab_path));
  if (!ckpt.vocab_hash.empty() && ckpt.vocab_hash != vocab.Hash()) {
    throw Error(ErrorCode::kConfigError,
                "checkpoint " + checkpoint_path + " was trained with a different "
                "vocabulary than " + vocab_path);
  }
  return std::make_unique<ToyBackend>(std::move(ckpt.params), std::move(vocab));
}

std::string ToyBackend::Complete(const PromptEnvelope& envelope,
                                 const CompletionParams& params) {
  params.Validate();
  return Generate(params_, vocab_, envelope.rendered, params.max_tokens);
}

// ---------------------------------------------------------------------------
// HTTP

RateLimiter::RateLimiter(double rate_per_sec, double burst)
    : rate_(rate_per_sec),
      burst_(std::max(1.0, burst)),
      tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::Acquire() {
  if (rate_ <= 0.0) return;
  while (true) {
    std::chrono::duration<double> wait{};
    {
      std::lock_guard lock(mu_);
      auto now = std::chrono::steady_clock::now();
      std::chrono::duration<double> elapsed = now - last_;
      last_ = now;
      tokens_ = std::min(burst_, tokens_ + elapsed.count() * rate_);
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    }
    std::this_thread::sleep_for(wait);
  }
}

std::string ChatRequestBody(const PromptEnvelope& envelope,
                            const HttpBackendConfig& config,
                            const CompletionParams& params) {
  nlohmann::ordered_json body;
  body["model"] = config.model_name;
  body["messages"] = nlohmann::ordered_json::array(
      {nlohmann::ordered_json{{"role", "system"},
                              {"content", envelope.instruction}},
       nlohmann::ordered_json{{"role", "user"}, {"content", envelope.content}}});
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_tokens;
  return body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

HttpBackend::HttpBackend(HttpBackendConfig config)
    : config_(std::move(config)),
      limiter_(config_.rate_limit_per_sec, config_.rate_burst) {
  internal::SplitEndpoint(config_.endpoint);
  if (!config_.credential_env.empty()) {
    token_ = internal::EnvValue(config_.credential_env);
    if (token_.empty()) {
      throw Error(ErrorCode::kAuthFailure, "environment variable " +
                                               config_.credential_env +
                                               " is not set");
    }
  }
}

std::string HttpBackend::Complete(const PromptEnvelope& envelope,
                                  const CompletionParams& params) {
  params.Validate();
  const auto url = internal::SplitEndpoint(config_.endpoint);
  const std::string body = ChatRequestBody(envelope, config_, params);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

  for (std::size_t attempt = 0;; ++attempt) {
    limiter_.Acquire();
    ++requests_;
    auto client = internal::MakeClient(url, params.timeout);
    auto res = client->Post(url.path, headers, body, "application/json");

    ErrorCode failure;
    std::string message;
    std::chrono::milliseconds retry_after{0};
    if (!res) {
      auto err = res.error();
      failure = (err == httplib::Error::Read ||
                 err == httplib::Error::ConnectionTimeout)
                    ? ErrorCode::kTimeout
                    : ErrorCode::kNetworkFailure;
      message = httplib::to_string(err);
    } else if (res->status == 200) {
      try {
        auto doc = nlohmann::json::parse(res->body);
        const auto& text = doc.at(nlohmann::json::json_pointer(config_.response_pointer));
        if (!text.is_string()) {
          throw Error(ErrorCode::kMalformedResponse,
                      config_.response_pointer + " is not a string");
        }
        return text.get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kMalformedResponse, e.what());
      }
    } else if (res->status == 401 || res->status == 403) {
      throw Error(ErrorCode::kAuthFailure,
                  "endpoint returned " + std::to_string(res->status));
    } else if (res->status == 429) {
      failure = ErrorCode::kRateLimited;
      message = "429 Too Many Requests";
      if (res->has_header("Retry-After")) {
        char* end = nullptr;
        auto header = res->get_header_value("Retry-After");
        double secs = std::strtod(header.c_str(), &end);
        if (end != header.c_str() && secs > 0) {
          retry_after = std::chrono::milliseconds(static_cast<long long>(secs * 1000));
        }
      }
    } else if (res->status == 408 || res->status >= 500) {
      failure = ErrorCode::kBackendUnavailable;
      message = "endpoint returned " + std::to_string(res->status);
    } else {
      throw Error(ErrorCode::kInvalidArgument,
                  "endpoint rejected the request with " +
                      std::to_string(res->status) + ": " + res->body);
    }

    if (attempt >= params.max_retries) {
      if (failure == ErrorCode::kTimeout) {
        throw Error(ErrorCode::kTimeout, message + " after " +
                                             std::to_string(attempt + 1) +
                                             " attempts");
      }
      throw Error(ErrorCode::kBackendUnavailable,
                  message + " after " + std::to_string(attempt + 1) +
                      " attempts");
    }
    auto delay = std::max(BackoffDelay(params, attempt),
                          std::min(retry_after, params.max_backoff));
    ++retries_;
    std::this_thread::sleep_for(delay);
  }
}

// ---------------------------------------------------------------------------
// Factory and batching

std::optional<BackendKind> ParseBackendKind(std::string_view name) {
  if (name == "http") return BackendKind::kHttp;
  if (name == "mock") return BackendKind::kMock;
  if (name == "toy") return BackendKind::kToy;
  return std::nullopt;
}

std::string_view BackendKindName(BackendKind kind) {
  switch (kind) {
    case BackendKind::kHttp: return "http";
    case BackendKind::kMock: return "mock";
    case BackendKind::kToy: return "toy";
  }
  return "mock";
}

std::unique_ptr<CompletionBackend> MakeBackend(const BackendConfig& config) {
  switch (config.kind) {
    case BackendKind::kMock:
      if (config.cue_table_path.empty()) return std::make_unique<MockBackend>();
      return std::make_unique<MockBackend>(
          MockBackend::CueTable::FromJson(ReadFile(config.cue_table_path)));
    case BackendKind::kToy:
      if (config.checkpoint_path.empty() || config.vocab_path.empty()) {
        throw Error(ErrorCode::kConfigError,
                    "toy backend needs checkpoint_path and vocab_path");
      }
      return ToyBackend::Load(config.checkpoint_path, config.vocab_path);
    case BackendKind::kHttp:
      if (config.http.endpoint.empty()) {
        throw Error(ErrorCode::kConfigError, "http backend needs an endpoint");
      }
      return std::make_unique<HttpBackend>(config.http);
  }
  throw Error(ErrorCode::kConfigError, "unknown backend kind");
}

std::vector<CompletionResult> CompleteBatch(
    std::span<const PromptEnvelope> envelopes, CompletionBackend& backend,
    const CompletionParams& params, std::size_t max_in_flight) {
  if (max_in_flight == 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_in_flight must be >= 1");
  }
  std::vector<CompletionResult> results(envelopes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < envelopes.size(); i = next++) {
      try {
        results[i].text = backend.Complete(envelopes[i], params);
      } catch (const Error& e) {
        results[i].error = e.code();
        results[i].error_message = e.what();
      } catch (const std::exception& e) {
        results[i].error = ErrorCode::kBackendUnavailable;
        results[i].error_message = e.what();
      }
    }
  };
  std::size_t workers = std::min(max_in_flight, envelopes.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return results;
}

}  // namespace finrag

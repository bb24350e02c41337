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

// Completion backends behind one interface: an HTTP chat-completions
// client, a keyword mock and the locally trained toy model.

#ifndef FINRAG_BACKEND_HPP_
#define FINRAG_BACKEND_HPP_

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "finrag/bpe.hpp"
#include "finrag/error.hpp"
#include "finrag/toy_lm.hpp"

namespace finrag {

/// A prompt in the "Human: <instruction> <content>, Assistant:" form with the
/// answer left open.
struct PromptEnvelope {
  std::string instruction;
  std::string content;
  std::string rendered;

  static PromptEnvelope Make(std::string_view instruction,
                             std::string_view content);
};

inline constexpr std::string_view kOpenAssistantSuffix = ", Assistant:";

struct CompletionParams {
  double temperature = 0.0;
  std::size_t max_tokens = 8;
  std::chrono::milliseconds timeout{30000};
  /// Retries after the first attempt, so at most 1 + max_retries requests.
  std::size_t max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::milliseconds max_backoff{5000};

  /// Throws Error(kInvalidArgument) for temperature < 0 or max_tokens == 0.
  void Validate() const;
};

/// Delay before retry number `retry` (0-based): initial * 2^retry, capped.
/// Non-decreasing in `retry`.
std::chrono::milliseconds BackoffDelay(const CompletionParams& params,
                                       std::size_t retry);

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string name() const = 0;
  /// Raw generated text, never mapped to a label. Safe to call from many
  /// threads.
  virtual std::string Complete(const PromptEnvelope& envelope,
                               const CompletionParams& params) = 0;
};

/// Cue-word test double. Counts positive and negative cue words (whole
/// tokens, case-insensitive) in the rendered prompt: more positive cues
/// answer "positive", more negative cues "negative", otherwise "neutral".
class MockBackend : public CompletionBackend {
 public:
  struct CueTable {
    std::vector<std::string> positive;
    std::vector<std::string> negative;

    static CueTable Default();
    /// {"positive": [...], "negative": [...]}
    static CueTable FromJson(std::string_view text);
  };

  MockBackend() : MockBackend(CueTable::Default()) {}
  explicit MockBackend(CueTable cues);

  std::string name() const override { return "mock"; }
  std::string Complete(const PromptEnvelope& envelope,
                       const CompletionParams& params) override;
  /// The rule itself, on arbitrary text.
  std::string Classify(std::string_view text) const;

 private:
  CueTable cues_;
};

/// Greedy decoding with a trained toy model. Temperature is ignored.
class ToyBackend : public CompletionBackend {
 public:
  ToyBackend(ToyLMParams params, Vocab vocab);
  /// Loads a checkpoint and vocabulary, checking that they belong together.
  static std::unique_ptr<ToyBackend> Load(const std::string& checkpoint_path,
                                          const std::string& vocab_path);

  std::string name() const override { return "toy"; }
  std::string Complete(const PromptEnvelope& envelope,
                       const CompletionParams& params) override;
  const Vocab& vocab() const { return vocab_; }

 private:
  ToyLMParams params_;
  Vocab vocab_;
};

/// Token bucket; Acquire blocks until a token is available.
class RateLimiter {
 public:
  /// rate_per_sec <= 0 disables limiting.
  RateLimiter(double rate_per_sec, double burst);
  void Acquire();

 private:
  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

struct HttpBackendConfig {
  std::string endpoint;  // e.g. https://api.example.com/v1/chat/completions
  std::string model_name;
  /// Environment variable holding the bearer token. Empty: no auth header.
  std::string credential_env;
  /// JSON pointer to the generated text in the response.
  std::string response_pointer = "/choices/0/message/content";
  double rate_limit_per_sec = 0.0;
  double rate_burst = 1.0;
};

/// Chat-completions request body: the instruction is the system message and
/// the content the user message.
std::string ChatRequestBody(const PromptEnvelope& envelope,
                            const HttpBackendConfig& config,
                            const CompletionParams& params);

/// Client for a chat-completions style endpoint with retries on 429, 5xx,
/// timeouts and connection failures.
class HttpBackend : public CompletionBackend {
 public:
  /// Throws Error(kAuthFailure) when credential_env names an unset variable,
  /// before any request is made.
  explicit HttpBackend(HttpBackendConfig config);

  std::string name() const override { return "http"; }
  std::string Complete(const PromptEnvelope& envelope,
                       const CompletionParams& params) override;

  std::size_t requests() const { return requests_.load(); }
  std::size_t retries() const { return retries_.load(); }

 private:
  HttpBackendConfig config_;
  std::string token_;
  RateLimiter limiter_;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> retries_{0};
};

enum class BackendKind { kHttp, kMock, kToy };

std::optional<BackendKind> ParseBackendKind(std::string_view name);
std::string_view BackendKindName(BackendKind kind);

struct BackendConfig {
  BackendKind kind = BackendKind::kMock;
  HttpBackendConfig http;
  std::string checkpoint_path;  // toy
  std::string vocab_path;       // toy
  std::string cue_table_path;   // mock; empty means built-in cues
};

/// Throws Error(kConfigError) when a kind-specific field is missing.
std::unique_ptr<CompletionBackend> MakeBackend(const BackendConfig& config);

struct CompletionResult {
  std::string text;
  std::optional<ErrorCode> error;
  std::string error_message;

  bool ok() const { return !error.has_value(); }
};

/// Runs all envelopes with at most `max_in_flight` outstanding requests.
/// Results line up with the input; one failure does not affect the rest.
std::vector<CompletionResult> CompleteBatch(
    std::span<const PromptEnvelope> envelopes, CompletionBackend& backend,
    const CompletionParams& params, std::size_t max_in_flight);

}  // namespace finrag

#endif  // FINRAG_BACKEND_HPP_

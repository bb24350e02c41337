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

#ifndef FINRAG_SOURCE_ADAPTER_HPP_
#define FINRAG_SOURCE_ADAPTER_HPP_

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "finrag/corpus_store.hpp"

namespace finrag {

/// A searchable external knowledge source.
class SourceAdapter {
 public:
  virtual ~SourceAdapter() = default;

  virtual std::string name() const = 0;
  /// Returns normalized documents with source_kind and id set. Throws
  /// Error(kNetworkFailure | kAuthFailure | kMalformedResponse).
  virtual std::vector<KnowledgeDoc> Search(
      std::string_view query, const std::optional<TimeRange>& range) = 0;
};

/// Serves documents from files in a directory: "*.jsonl" files in the corpus
/// format and "*.txt" files whose first line is the title. Every document is
/// returned (subject to the time range); relevance filtering happens later.
class LocalDirectoryAdapter : public SourceAdapter {
 public:
  LocalDirectoryAdapter(std::filesystem::path dir, SourceKind kind);

  std::string name() const override;
  std::vector<KnowledgeDoc> Search(
      std::string_view query, const std::optional<TimeRange>& range) override;

 private:
  std::filesystem::path dir_;
  SourceKind kind_;
};

/// Config for a generic JSON search API reached with GET.
struct HttpSourceConfig {
  std::string name = "http";
  SourceKind kind = SourceKind::kNews;
  std::string endpoint;  // absolute URL including path
  /// Query parameter template; "{query}", "{start}" and "{end}" are
  /// substituted (times as RFC3339). Parameters whose template references a
  /// time that is not available are omitted.
  std::map<std::string, std::string> params = {{"q", "{query}"}};
  /// Environment variable holding a bearer token. Credentials never live in
  /// config files.
  std::string credential_env;
  /// JSON pointer to the result array in the response.
  std::string results_pointer = "/results";
  /// Result object field names.
  std::string title_field = "title";
  std::string body_field = "body";
  std::string published_at_field = "published_at";
  std::string url_field = "url";
  std::chrono::milliseconds timeout{10000};
};

class HttpSearchAdapter : public SourceAdapter {
 public:
  explicit HttpSearchAdapter(HttpSourceConfig config);

  std::string name() const override { return config_.name; }
  std::vector<KnowledgeDoc> Search(
      std::string_view query, const std::optional<TimeRange>& range) override;

 private:
  HttpSourceConfig config_;
};

/// Maps a search response body onto documents. Exposed for tests.
std::vector<KnowledgeDoc> ParseSearchResponse(std::string_view body,
                                              const HttpSourceConfig& config);

enum class CachePolicy {
  kAlwaysFetch,
  kPreferLocal,  // repeat queries are answered from the store
};

/// fetch_external: searches an adapter and caches the results in the store.
class ExternalFetcher {
 public:
  ExternalFetcher(CorpusStore& store, SourceAdapter& adapter,
                  CachePolicy policy = CachePolicy::kPreferLocal);

  std::vector<KnowledgeDoc> Fetch(std::string_view query,
                                  const std::optional<TimeRange>& range);
  /// Number of times the adapter was actually searched.
  std::size_t adapter_calls() const { return adapter_calls_.load(); }

 private:
  CorpusStore& store_;
  SourceAdapter& adapter_;
  CachePolicy policy_;
  std::atomic<std::size_t> adapter_calls_{0};
  std::mutex mu_;
  std::map<std::string, std::vector<std::string>> cache_;  // key -> doc ids
};

}  // namespace finrag

#endif  // FINRAG_SOURCE_ADAPTER_HPP_

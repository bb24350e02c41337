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

// Knowledge documents, their persistent store and the inverted index used
// for candidate generation.

#ifndef FINRAG_CORPUS_STORE_HPP_
#define FINRAG_CORPUS_STORE_HPP_

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "finrag/lexical.hpp"
#include "finrag/util.hpp"

namespace finrag {

enum class SourceKind {
  kNews,
  kCentralizedResearch,
  kCrowdResearch,
  kSocial,
};

std::string_view SourceKindName(SourceKind kind);
std::optional<SourceKind> ParseSourceKind(std::string_view name);

struct KnowledgeDoc {
  std::string id;  // filled by ContentId on ingest
  SourceKind source_kind = SourceKind::kNews;
  std::string title;
  std::string body;
  std::optional<UtcTime> published_at;
  std::optional<std::string> url;
};

/// Stable id derived from (title, body, url): the first 16 hex digits of the
/// SHA-256 of a length-prefixed encoding of the three fields.
std::string ContentId(std::string_view title, std::string_view body,
                      const std::optional<std::string>& url);

/// Tokens indexed for a document: title and body together.
TokenSet DocumentTokens(const KnowledgeDoc& doc);

struct TimeRange {
  UtcTime start;
  UtcTime end;

  /// Throws Error(kInvalidArgument) unless start < end.
  static TimeRange Make(UtcTime start, UtcTime end);
  /// [t - before, t + after].
  static TimeRange Around(UtcTime t, std::chrono::seconds before,
                          std::chrono::seconds after);
  bool Contains(UtcTime t) const { return start <= t && t <= end; }
};

/// Corpus JSONL object -> document (id computed). Throws LineError.
KnowledgeDoc ParseCorpusLine(std::string_view line, std::size_t line_no);
/// Document -> corpus JSONL object, including its id.
std::string CorpusLineFromDoc(const KnowledgeDoc& doc);

struct InvertedIndex {
  std::map<std::string, std::set<std::string>, std::less<>> postings;
  std::map<std::string, TokenSet> doc_tokens;

  void Add(const std::string& doc_id, const TokenSet& tokens);
  /// token t in doc_tokens[d] <=> d in postings[t].
  bool Consistent() const;
};

struct CandidateOptions {
  /// When non-empty a candidate must also contain at least one of these
  /// token sequences contiguously (stopwords removed).
  std::vector<std::vector<std::string>> phrases;
};

/// Documents and their index. Any number of concurrent readers, one writer.
/// With a directory the store keeps an append-only "docs.jsonl" log there and
/// rebuilds the index from it on open.
class CorpusStore {
 public:
  CorpusStore();
  explicit CorpusStore(const std::filesystem::path& dir);

  CorpusStore(const CorpusStore&) = delete;
  CorpusStore& operator=(const CorpusStore&) = delete;

  struct IngestResult {
    std::string id;
    bool inserted = false;  // false: identical content already stored
  };

  /// Throws Error(kEmptyDocument) when both title and body are blank and
  /// Error(kStorageFailure) when the log cannot be appended.
  IngestResult Ingest(KnowledgeDoc doc);

  std::size_t size() const;
  std::optional<KnowledgeDoc> Get(std::string_view id) const;
  /// All documents ordered by id.
  std::vector<KnowledgeDoc> AllDocs() const;
  TokenSet Tokens(std::string_view id) const;

  /// Every document sharing at least one token with `query_tokens`. With a
  /// range, documents lacking published_at are dropped. Ordered by
  /// descending shared-token count, then id. Throws Error(kEmptyQuery).
  std::vector<KnowledgeDoc> QueryCandidates(
      const TokenSet& query_tokens, const std::optional<TimeRange>& range,
      const CandidateOptions& options = {}) const;

  /// Rebuilds the index from the documents and swaps it in atomically.
  void RebuildIndex();
  bool IndexConsistent() const;
  /// Copy of the current index, for audits.
  InvertedIndex IndexSnapshot() const;

 private:
  std::optional<std::filesystem::path> log_path_;
  mutable std::shared_mutex mu_;
  std::map<std::string, KnowledgeDoc, std::less<>> docs_;
  std::shared_ptr<InvertedIndex> index_;
};

}  // namespace finrag

#endif  // FINRAG_CORPUS_STORE_HPP_

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

// Two-step knowledge retrieval for short financial headlines.
//
// 1. Candidate documents are those sharing a token with the query.
// 2. A candidate is kept when its overlap coefficient with the query exceeds
//    the document threshold (0.8). Each kept document is split into units
//    (title, paragraphs, bullet points); units whose overlap with the query
//    exceeds the unit threshold (0.7) form the context.
//
// overlap(X, Y) = |X n Y| / min(|X|, |Y|)

#ifndef FINRAG_RETRIEVAL_HPP_
#define FINRAG_RETRIEVAL_HPP_

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "finrag/corpus_store.hpp"
#include "finrag/lexical.hpp"

namespace finrag {

struct Query {
  std::string raw;
  std::string cleaned;
  TokenSet tokens;
  std::vector<std::string> ordered_tokens;
  std::optional<UtcTime> timestamp;

  /// All-noise input (only URLs, mentions, punctuation): retrieval is skipped.
  bool skip_retrieval() const { return tokens.empty(); }
};

Query PreprocessQuery(std::string_view raw,
                      std::optional<UtcTime> timestamp = std::nullopt);

/// Szymkiewicz-Simpson overlap coefficient; 0 when either set is empty.
double Overlap(const TokenSet& x, const TokenSet& y);

/// Title first, then body paragraphs (separated by blank lines) and bullet
/// items (lines starting with "-", "*" or "•" followed by a space). Lines
/// inside a unit are joined with one space; empty units are dropped.
std::vector<std::string> SegmentUnits(const KnowledgeDoc& doc);

struct ContextUnit {
  std::string text;
  std::string parent_doc_id;
  std::size_t unit_index = 0;
  double unit_score = 0.0;
};

inline constexpr std::string_view kUnitSeparator = "\n";

struct ContextBundle {
  /// Ordered by parent doc score (descending, ties by id), then unit_index.
  std::vector<ContextUnit> units;
  /// Scores of the documents that passed the document threshold.
  std::map<std::string, double> doc_scores;
  /// Unit texts joined with kUnitSeparator.
  std::string concatenated;

  bool empty() const { return units.empty(); }
};

struct RetrievalOptions {
  double doc_threshold = 0.8;
  double unit_threshold = 0.7;
  /// Explicit search window. When absent and the query has a timestamp, the
  /// window [timestamp - window_before, timestamp + window_after] is used.
  std::optional<TimeRange> range;
  bool range_from_timestamp = true;
  std::chrono::seconds window_before = std::chrono::hours(72);
  std::chrono::seconds window_after = std::chrono::hours(24);
  /// 0 disables phrase matching in candidate generation; n >= 2 requires a
  /// candidate to contain one of the query's n-grams.
  std::size_t phrase_ngram = 0;
};

struct RetrievalTrace {
  struct Candidate {
    std::string doc_id;
    double doc_score = 0.0;
    bool kept = false;
  };
  struct Unit {
    std::string doc_id;
    std::size_t unit_index = 0;
    double unit_score = 0.0;
    bool kept = false;
    std::string text;
  };
  std::string query;
  std::vector<std::string> tokens;
  std::optional<TimeRange> range;
  std::vector<Candidate> candidates;
  std::vector<Unit> units;
  std::string bundle;
};

/// The search window RetrieveContext will use for `query`.
std::optional<TimeRange> EffectiveRange(const Query& query,
                                        const RetrievalOptions& options);

/// Runs both retrieval steps. Thresholds are strict (a document scoring
/// exactly 0.8 is dropped). Throws Error(kEmptyQuery) when the query has no
/// tokens; returns an empty bundle when nothing passes.
ContextBundle RetrieveContext(const Query& query, const CorpusStore& store,
                              const RetrievalOptions& options = {},
                              RetrievalTrace* trace = nullptr);

/// One JSON object (single line) per trace.
std::string TraceToJson(const RetrievalTrace& trace);

using TokenCounter = std::function<std::size_t(std::string_view)>;

/// Counts whitespace-separated words; used when no BPE vocabulary is around.
TokenCounter WordCounter();

/// "Context: <units>\nNews: <cleaned query>". Units are dropped whole from
/// the end until the prompt fits `token_budget`; with no unit left (or an
/// empty bundle) the raw query is returned unchanged. Throws
/// Error(kBudgetTooSmall) when the raw query alone exceeds the budget.
std::string AugmentQuery(const Query& query, const ContextBundle& bundle,
                         std::size_t token_budget, const TokenCounter& counter);

}  // namespace finrag

#endif  // FINRAG_RETRIEVAL_HPP_

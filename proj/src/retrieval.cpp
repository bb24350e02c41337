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

#include "finrag/retrieval.hpp"

#include <algorithm>

#include "finrag/error.hpp"
#include "json.hpp"

namespace finrag {

Query PreprocessQuery(std::string_view raw, std::optional<UtcTime> timestamp) {
  Query q;
  q.raw = std::string(raw);
  q.cleaned = CleanText(raw);
  q.ordered_tokens = LexicalTokenSequence(q.cleaned);
  q.tokens = TokenSet(q.ordered_tokens.begin(), q.ordered_tokens.end());
  q.timestamp = timestamp;
  return q;
}

double Overlap(const TokenSet& x, const TokenSet& y) {
  if (x.empty() || y.empty()) return 0.0;
  const TokenSet& small = x.size() <= y.size() ? x : y;
  const TokenSet& large = x.size() <= y.size() ? y : x;
  std::size_t shared = 0;
  for (const auto& t : small) shared += large.contains(t) ? 1 : 0;
  return static_cast<double>(shared) / static_cast<double>(small.size());
}

namespace {

// Returns the text after a bullet marker, or nullopt if `line` (already
// trimmed) is not a bullet item.
std::optional<std::string_view> BulletText(std::string_view line) {
  for (std::string_view marker : {"-", "*", "\xE2\x80\xA2"}) {  // U+2022
    if (line.starts_with(marker)) {
      auto rest = line.substr(marker.size());
      if (rest.empty()) return rest;
      if (rest.front() == ' ' || rest.front() == '\t') return Trim(rest);
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<std::string> SegmentUnits(const KnowledgeDoc& doc) {
  std::vector<std::string> units;
  if (auto title = Trim(doc.title); !title.empty()) {
    units.emplace_back(title);
  }
  std::string current;
  auto flush = [&]() {
    if (!current.empty()) units.push_back(std::move(current));
    current.clear();
  };
  std::string_view body = doc.body;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto nl = body.find('\n', pos);
    auto line = Trim(body.substr(pos, nl == std::string_view::npos
                                          ? std::string_view::npos
                                          : nl - pos));
    if (line.empty()) {
      flush();
    } else if (auto bullet = BulletText(line)) {
      flush();
      current = std::string(*bullet);
    } else {
      if (!current.empty()) current.push_back(' ');
      current.append(line);
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  flush();
  return units;
}

std::optional<TimeRange> EffectiveRange(const Query& query,
                                        const RetrievalOptions& options) {
  if (options.range) return options.range;
  if (options.range_from_timestamp && query.timestamp) {
    return TimeRange::Around(*query.timestamp, options.window_before,
                             options.window_after);
  }
  return std::nullopt;
}

ContextBundle RetrieveContext(const Query& query, const CorpusStore& store,
                              const RetrievalOptions& options,
                              RetrievalTrace* trace) {
  if (query.tokens.empty()) {
    throw Error(ErrorCode::kEmptyQuery,
                "query has no tokens after preprocessing");
  }
  auto range = EffectiveRange(query, options);
  CandidateOptions candidate_options;
  if (options.phrase_ngram >= 2 &&
      query.ordered_tokens.size() >= options.phrase_ngram) {
    for (std::size_t i = 0;
         i + options.phrase_ngram <= query.ordered_tokens.size(); ++i) {
      candidate_options.phrases.emplace_back(
          query.ordered_tokens.begin() + static_cast<std::ptrdiff_t>(i),
          query.ordered_tokens.begin() +
              static_cast<std::ptrdiff_t>(i + options.phrase_ngram));
    }
  }
  auto candidates = store.QueryCandidates(query.tokens, range, candidate_options);

  if (trace) {
    trace->query = query.raw;
    trace->tokens.assign(query.tokens.begin(), query.tokens.end());
    trace->range = range;
  }

  struct Kept {
    double score;
    const KnowledgeDoc* doc;
  };
  std::vector<Kept> kept;
  for (const auto& doc : candidates) {
    double score = Overlap(query.tokens, store.Tokens(doc.id));
    bool pass = score > options.doc_threshold;
    if (trace) trace->candidates.push_back({doc.id, score, pass});
    if (pass) kept.push_back({score, &doc});
  }
  std::stable_sort(kept.begin(), kept.end(), [](const Kept& a, const Kept& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc->id < b.doc->id;
  });

  ContextBundle bundle;
  for (const auto& [score, doc] : kept) {
    bundle.doc_scores[doc->id] = score;
    auto units = SegmentUnits(*doc);
    for (std::size_t i = 0; i < units.size(); ++i) {
      double unit_score = Overlap(query.tokens, CleanTokens(units[i]));
      bool pass = unit_score > options.unit_threshold;
      if (trace) trace->units.push_back({doc->id, i, unit_score, pass, units[i]});
      if (pass) bundle.units.push_back({units[i], doc->id, i, unit_score});
    }
  }
  for (std::size_t i = 0; i < bundle.units.size(); ++i) {
    if (i > 0) bundle.concatenated.append(kUnitSeparator);
    bundle.concatenated.append(bundle.units[i].text);
  }
  if (trace) trace->bundle = bundle.concatenated;
  return bundle;
}

std::string TraceToJson(const RetrievalTrace& trace) {
  nlohmann::ordered_json obj;
  obj["query"] = trace.query;
  obj["tokens"] = trace.tokens;
  if (trace.range) {
    obj["range"] = {FormatRfc3339(trace.range->start),
                    FormatRfc3339(trace.range->end)};
  } else {
    obj["range"] = nullptr;
  }
  auto candidates = nlohmann::ordered_json::array();
  for (const auto& c : trace.candidates) {
    candidates.push_back(
        {{"id", c.doc_id}, {"doc_score", c.doc_score}, {"kept", c.kept}});
  }
  obj["candidates"] = std::move(candidates);
  auto units = nlohmann::ordered_json::array();
  for (const auto& u : trace.units) {
    units.push_back({{"doc_id", u.doc_id},
                     {"unit_index", u.unit_index},
                     {"unit_score", u.unit_score},
                     {"kept", u.kept},
                     {"text", u.text}});
  }
  obj["units"] = std::move(units);
  obj["bundle"] = trace.bundle;
  return obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

TokenCounter WordCounter() {
  return [](std::string_view text) {
    std::size_t count = 0;
    bool in_word = false;
    for (char c : text) {
      bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
      if (!space && !in_word) ++count;
      in_word = !space;
    }
    return count;
  };
}

std::string AugmentQuery(const Query& query, const ContextBundle& bundle,
                         std::size_t token_budget, const TokenCounter& counter) {
  std::size_t query_cost = counter(query.raw);
  if (query_cost > token_budget) {
    throw Error(ErrorCode::kBudgetTooSmall,
                "query needs " + std::to_string(query_cost) +
                    " tokens, budget is " + std::to_string(token_budget));
  }
  for (std::size_t keep = bundle.units.size(); keep > 0; --keep) {
    std::string prompt = "Context: ";
    for (std::size_t i = 0; i < keep; ++i) {
      if (i > 0) prompt.append(kUnitSeparator);
      prompt.append(bundle.units[i].text);
    }
    prompt.append("\nNews: ");
    prompt.append(query.cleaned);
    if (counter(prompt) <= token_budget) return prompt;
  }
  return query.raw;
}

}  // namespace finrag

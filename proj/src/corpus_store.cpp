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

#include "finrag/corpus_store.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>

#include "finrag/error.hpp"
#include "json.hpp"

namespace finrag {

using json = nlohmann::json;

std::string_view SourceKindName(SourceKind kind) {
  switch (kind) {
    case SourceKind::kNews: return "news";
    case SourceKind::kCentralizedResearch: return "centralized_research";
    case SourceKind::kCrowdResearch: return "crowd_research";
    case SourceKind::kSocial: return "social";
  }
  return "news";
}

std::optional<SourceKind> ParseSourceKind(std::string_view name) {
  for (auto kind : {SourceKind::kNews, SourceKind::kCentralizedResearch,
                    SourceKind::kCrowdResearch, SourceKind::kSocial}) {
    if (name == SourceKindName(kind)) return kind;
  }
  return std::nullopt;
}

std::string ContentId(std::string_view title, std::string_view body,
                      const std::optional<std::string>& url) {
  std::string buf;
  auto field = [&](std::string_view f) {
    buf += std::to_string(f.size());
    buf.push_back(':');
    buf.append(f);
  };
  field(title);
  field(body);
  if (url) {
    field(*url);
  } else {
    buf += "-";
  }
  return Sha256Hex(buf).substr(0, 16);
}

TokenSet DocumentTokens(const KnowledgeDoc& doc) {
  return CleanTokens(doc.title + "\n" + doc.body);
}

TimeRange TimeRange::Make(UtcTime start, UtcTime end) {
  if (!(start < end)) {
    throw Error(ErrorCode::kInvalidArgument, "time range needs start < end");
  }
  return {start, end};
}

TimeRange TimeRange::Around(UtcTime t, std::chrono::seconds before,
                            std::chrono::seconds after) {
  return Make(t - before, t + after);
}

KnowledgeDoc ParseCorpusLine(std::string_view line, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::exception& e) {
    throw LineError(ErrorCode::kMalformedLine, line_no, e.what());
  }
  if (!obj.is_object()) {
    throw LineError(ErrorCode::kMalformedLine, line_no, "not a JSON object");
  }
  auto optional_string = [&](const char* key) -> std::optional<std::string> {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
      throw LineError(ErrorCode::kMalformedLine, line_no,
                      std::string("\"") + key + "\" must be a string");
    }
    return it->get<std::string>();
  };
  KnowledgeDoc doc;
  doc.title = optional_string("title").value_or("");
  doc.body = optional_string("body").value_or("");
  if (IsBlank(doc.title) && IsBlank(doc.body)) {
    throw LineError(ErrorCode::kEmptyDocument, line_no,
                    "document has neither title nor body");
  }
  auto kind = optional_string("source_kind").value_or("news");
  auto parsed_kind = ParseSourceKind(kind);
  if (!parsed_kind) {
    throw LineError(ErrorCode::kMalformedLine, line_no,
                    "unknown source_kind '" + kind + "'");
  }
  doc.source_kind = *parsed_kind;
  if (auto ts = optional_string("published_at")) {
    doc.published_at = ParseRfc3339(*ts);
    if (!doc.published_at) {
      throw LineError(ErrorCode::kMalformedLine, line_no,
                      "bad published_at '" + *ts + "'");
    }
  }
  doc.url = optional_string("url");
  doc.id = ContentId(doc.title, doc.body, doc.url);
  return doc;
}

std::string CorpusLineFromDoc(const KnowledgeDoc& doc) {
  json obj = json::object();
  obj["id"] = doc.id;
  obj["title"] = doc.title;
  obj["body"] = doc.body;
  obj["source_kind"] = SourceKindName(doc.source_kind);
  if (doc.published_at) obj["published_at"] = FormatRfc3339(*doc.published_at);
  if (doc.url) obj["url"] = *doc.url;
  return obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void InvertedIndex::Add(const std::string& doc_id, const TokenSet& tokens) {
  for (const auto& t : tokens) postings[t].insert(doc_id);
  doc_tokens[doc_id] = tokens;
}

bool InvertedIndex::Consistent() const {
  std::size_t pairs = 0;
  for (const auto& [doc, tokens] : doc_tokens) {
    for (const auto& t : tokens) {
      auto it = postings.find(t);
      if (it == postings.end() || !it->second.contains(doc)) return false;
      ++pairs;
    }
  }
  std::size_t posted = 0;
  for (const auto& [t, docs] : postings) {
    if (docs.empty()) return false;
    posted += docs.size();
  }
  return posted == pairs;
}

CorpusStore::CorpusStore() : index_(std::make_shared<InvertedIndex>()) {}

CorpusStore::CorpusStore(const std::filesystem::path& dir)
    : index_(std::make_shared<InvertedIndex>()) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::kStorageFailure,
                "cannot create " + dir.string() + ": " + ec.message());
  }
  log_path_ = dir / "docs.jsonl";
  if (std::filesystem::exists(*log_path_)) {
    std::ifstream in(*log_path_);
    if (!in) {
      throw Error(ErrorCode::kStorageFailure, "cannot read " + log_path_->string());
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (IsBlank(line)) continue;
      KnowledgeDoc doc;
      try {
        doc = ParseCorpusLine(line, line_no);
      } catch (const LineError& e) {
        throw Error(ErrorCode::kStorageFailure,
                    log_path_->string() + ": " + e.what());
      }
      if (!docs_.contains(doc.id)) {
        index_->Add(doc.id, DocumentTokens(doc));
        docs_.emplace(doc.id, std::move(doc));
      }
    }
  }
}

CorpusStore::IngestResult CorpusStore::Ingest(KnowledgeDoc doc) {
  if (IsBlank(doc.title) && IsBlank(doc.body)) {
    throw Error(ErrorCode::kEmptyDocument, "document has neither title nor body");
  }
  doc.id = ContentId(doc.title, doc.body, doc.url);
  TokenSet tokens = DocumentTokens(doc);
  std::unique_lock lock(mu_);
  if (docs_.contains(doc.id)) return {doc.id, false};
  if (log_path_) {
    std::ofstream out(*log_path_, std::ios::app);
    out << CorpusLineFromDoc(doc) << '\n';
    out.flush();
    if (!out) {
      throw Error(ErrorCode::kStorageFailure,
                  "cannot append to " + log_path_->string());
    }
  }
  index_->Add(doc.id, tokens);
  std::string id = doc.id;
  docs_.emplace(id, std::move(doc));
  return {id, true};
}

std::size_t CorpusStore::size() const {
  std::shared_lock lock(mu_);
  return docs_.size();
}

std::optional<KnowledgeDoc> CorpusStore::Get(std::string_view id) const {
  std::shared_lock lock(mu_);
  auto it = docs_.find(id);
  if (it == docs_.end()) return std::nullopt;
  return it->second;
}

std::vector<KnowledgeDoc> CorpusStore::AllDocs() const {
  std::shared_lock lock(mu_);
  std::vector<KnowledgeDoc> out;
  out.reserve(docs_.size());
  for (const auto& [id, doc] : docs_) out.push_back(doc);
  return out;
}

TokenSet CorpusStore::Tokens(std::string_view id) const {
  std::shared_lock lock(mu_);
  auto it = index_->doc_tokens.find(std::string(id));
  return it == index_->doc_tokens.end() ? TokenSet{} : it->second;
}

namespace {

bool ContainsPhrase(const std::vector<std::string>& haystack,
                    const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), phrase.begin(),
                     phrase.end()) != haystack.end();
}

}  // namespace

std::vector<KnowledgeDoc> CorpusStore::QueryCandidates(
    const TokenSet& query_tokens, const std::optional<TimeRange>& range,
    const CandidateOptions& options) const {
  if (query_tokens.empty()) {
    throw Error(ErrorCode::kEmptyQuery, "query has no tokens");
  }
  std::shared_lock lock(mu_);
  std::map<std::string, std::size_t> shared;
  for (const auto& t : query_tokens) {
    auto it = index_->postings.find(t);
    if (it == index_->postings.end()) continue;
    for (const auto& id : it->second) ++shared[id];
  }
  std::vector<std::pair<std::size_t, const KnowledgeDoc*>> hits;
  for (const auto& [id, count] : shared) {
    const KnowledgeDoc& doc = docs_.find(id)->second;
    if (range && (!doc.published_at || !range->Contains(*doc.published_at))) {
      continue;
    }
    if (!options.phrases.empty()) {
      auto seq = LexicalTokenSequence(CleanText(doc.title + "\n" + doc.body));
      bool any = std::any_of(
          options.phrases.begin(), options.phrases.end(),
          [&](const auto& phrase) { return ContainsPhrase(seq, phrase); });
      if (!any) continue;
    }
    hits.emplace_back(count, &doc);
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->id < b.second->id;
  });
  std::vector<KnowledgeDoc> out;
  out.reserve(hits.size());
  for (const auto& [count, doc] : hits) out.push_back(*doc);
  return out;
}

void CorpusStore::RebuildIndex() {
  std::vector<KnowledgeDoc> docs = AllDocs();
  auto fresh = std::make_shared<InvertedIndex>();
  for (const auto& doc : docs) fresh->Add(doc.id, DocumentTokens(doc));
  std::unique_lock lock(mu_);
  // A concurrent ingest may have landed between the copy and the swap.
  for (const auto& [id, doc] : docs_) {
    if (!fresh->doc_tokens.contains(id)) fresh->Add(id, DocumentTokens(doc));
  }
  index_ = std::move(fresh);
}

bool CorpusStore::IndexConsistent() const {
  std::shared_lock lock(mu_);
  if (index_->doc_tokens.size() != docs_.size()) return false;
  return index_->Consistent();
}

InvertedIndex CorpusStore::IndexSnapshot() const {
  std::shared_lock lock(mu_);
  return *index_;
}

}  // namespace finrag

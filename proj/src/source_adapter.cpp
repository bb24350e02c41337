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

#include "finrag/source_adapter.hpp"

#include <algorithm>
#include <fstream>

#include "finrag/error.hpp"
#include "http_util.hpp"
#include "json.hpp"

namespace finrag {

using json = nlohmann::json;

LocalDirectoryAdapter::LocalDirectoryAdapter(std::filesystem::path dir,
                                             SourceKind kind)
    : dir_(std::move(dir)), kind_(kind) {}

std::string LocalDirectoryAdapter::name() const {
  return "local:" + dir_.string();
}

std::vector<KnowledgeDoc> LocalDirectoryAdapter::Search(
    std::string_view /*query*/, const std::optional<TimeRange>& range) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir_, ec)) {
    throw Error(ErrorCode::kStorageFailure, dir_.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<KnowledgeDoc> out;
  for (const auto& path : files) {
    auto ext = path.extension().string();
    if (ext == ".jsonl") {
      std::ifstream in(path);
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (IsBlank(line)) continue;
        KnowledgeDoc doc = ParseCorpusLine(line, line_no);
        doc.source_kind = kind_;
        out.push_back(std::move(doc));
      }
    } else if (ext == ".txt") {
      std::string text = ReadFile(path.string());
      auto nl = text.find('\n');
      KnowledgeDoc doc;
      doc.source_kind = kind_;
      doc.title = std::string(Trim(text.substr(0, nl)));
      doc.body = nl == std::string::npos ? "" : text.substr(nl + 1);
      if (IsBlank(doc.title) && IsBlank(doc.body)) continue;
      doc.id = ContentId(doc.title, doc.body, doc.url);
      out.push_back(std::move(doc));
    }
  }
  if (range) {
    std::erase_if(out, [&](const KnowledgeDoc& d) {
      return !d.published_at || !range->Contains(*d.published_at);
    });
  }
  return out;
}

HttpSearchAdapter::HttpSearchAdapter(HttpSourceConfig config)
    : config_(std::move(config)) {
  internal::SplitEndpoint(config_.endpoint);  // validates early
}

namespace {

std::optional<std::string> Substitute(const std::string& tmpl,
                                      std::string_view query,
                                      const std::optional<TimeRange>& range) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl.compare(i, 7, "{query}") == 0) {
      out.append(query);
      i += 7;
    } else if (tmpl.compare(i, 7, "{start}") == 0) {
      if (!range) return std::nullopt;
      out += FormatRfc3339(range->start);
      i += 7;
    } else if (tmpl.compare(i, 5, "{end}") == 0) {
      if (!range) return std::nullopt;
      out += FormatRfc3339(range->end);
      i += 5;
    } else {
      out.push_back(tmpl[i++]);
    }
  }
  return out;
}

}  // namespace

std::vector<KnowledgeDoc> ParseSearchResponse(std::string_view body,
                                              const HttpSourceConfig& config) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, e.what());
  }
  const json* results = nullptr;
  try {
    results = &doc.at(json::json_pointer(config.results_pointer));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse,
                "no result array at " + config.results_pointer);
  }
  if (!results->is_array()) {
    throw Error(ErrorCode::kMalformedResponse,
                config.results_pointer + " is not an array");
  }
  std::vector<KnowledgeDoc> out;
  for (const auto& item : *results) {
    if (!item.is_object()) {
      throw Error(ErrorCode::kMalformedResponse, "result is not an object");
    }
    auto str = [&](const std::string& key) -> std::optional<std::string> {
      auto it = item.find(key);
      if (it == item.end() || it->is_null()) return std::nullopt;
      if (!it->is_string()) {
        throw Error(ErrorCode::kMalformedResponse,
                    "result field '" + key + "' is not a string");
      }
      return it->get<std::string>();
    };
    KnowledgeDoc d;
    d.source_kind = config.kind;
    d.title = str(config.title_field).value_or("");
    d.body = str(config.body_field).value_or("");
    if (IsBlank(d.title) && IsBlank(d.body)) continue;
    if (auto ts = str(config.published_at_field)) {
      d.published_at = ParseRfc3339(*ts);
    }
    d.url = str(config.url_field);
    d.id = ContentId(d.title, d.body, d.url);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<KnowledgeDoc> HttpSearchAdapter::Search(
    std::string_view query, const std::optional<TimeRange>& range) {
  auto url = internal::SplitEndpoint(config_.endpoint);
  httplib::Headers headers;
  if (!config_.credential_env.empty()) {
    std::string token = internal::EnvValue(config_.credential_env);
    if (token.empty()) {
      throw Error(ErrorCode::kAuthFailure,
                  "environment variable " + config_.credential_env + " is not set");
    }
    headers.emplace("Authorization", "Bearer " + token);
  }
  httplib::Params params;
  for (const auto& [key, tmpl] : config_.params) {
    if (auto value = Substitute(tmpl, query, range)) params.emplace(key, *value);
  }
  auto client = internal::MakeClient(url, config_.timeout);
  auto res = client->Get(url.path, params, headers);
  if (!res) {
    throw Error(ErrorCode::kNetworkFailure,
                config_.endpoint + ": " + httplib::to_string(res.error()));
  }
  if (res->status == 401 || res->status == 403) {
    throw Error(ErrorCode::kAuthFailure,
                config_.endpoint + " returned " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kNetworkFailure,
                config_.endpoint + " returned " + std::to_string(res->status));
  }
  auto docs = ParseSearchResponse(res->body, config_);
  if (range) {
    std::erase_if(docs, [&](const KnowledgeDoc& d) {
      return d.published_at && !range->Contains(*d.published_at);
    });
  }
  return docs;
}

ExternalFetcher::ExternalFetcher(CorpusStore& store, SourceAdapter& adapter,
                                 CachePolicy policy)
    : store_(store), adapter_(adapter), policy_(policy) {}

std::vector<KnowledgeDoc> ExternalFetcher::Fetch(
    std::string_view query, const std::optional<TimeRange>& range) {
  std::string key = adapter_.name() + '\x1f' + std::string(query) + '\x1f';
  if (range) {
    key += FormatRfc3339(range->start) + '/' + FormatRfc3339(range->end);
  }
  if (policy_ == CachePolicy::kPreferLocal) {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      std::vector<KnowledgeDoc> out;
      bool complete = true;
      for (const auto& id : it->second) {
        if (auto doc = store_.Get(id)) {
          out.push_back(std::move(*doc));
        } else {
          complete = false;
        }
      }
      if (complete) return out;
    }
  }
  ++adapter_calls_;
  auto docs = adapter_.Search(query, range);
  std::vector<std::string> ids;
  for (auto& doc : docs) {
    doc.id = store_.Ingest(doc).id;
    ids.push_back(doc.id);
  }
  std::lock_guard lock(mu_);
  cache_[key] = std::move(ids);
  return docs;
}

}  // namespace finrag

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

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "finrag/error.hpp"
#include "generators.hpp"
#include "test_paths.hpp"

namespace finrag {
namespace {

KnowledgeDoc Doc(std::string title, std::string body,
                 std::optional<std::string> when = std::nullopt) {
  KnowledgeDoc d;
  d.title = std::move(title);
  d.body = std::move(body);
  if (when) d.published_at = ParseRfc3339(*when);
  return d;
}

TEST(ContentIdTest, StableAndFieldSensitive) {
  auto a = ContentId("t", "b", std::nullopt);
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(a, ContentId("t", "b", std::nullopt));
  EXPECT_NE(a, ContentId("tb", "", std::nullopt));
  EXPECT_NE(a, ContentId("t", "b", std::string("")));
  EXPECT_NE(a, ContentId("t", "b", std::string("https://x")));
}

TEST(CorpusStoreTest, IngestIsIdempotent) {
  CorpusStore store;
  auto first = store.Ingest(Doc("Fed holds rates", "Policy unchanged."));
  EXPECT_TRUE(first.inserted);
  auto again = store.Ingest(Doc("Fed holds rates", "Policy unchanged."));
  EXPECT_FALSE(again.inserted);
  EXPECT_EQ(first.id, again.id);
  EXPECT_EQ(store.size(), 1u);
  EXPECT_TRUE(store.IndexConsistent());
}

TEST(CorpusStoreTest, RejectsBlankDocuments) {
  CorpusStore store;
  try {
    store.Ingest(Doc("  ", "\n"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyDocument);
  }
  EXPECT_EQ(store.size(), 0u);
}

TEST(CorpusStoreTest, PersistsAcrossReopen) {
  testing::TempDir dir;
  std::string id;
  {
    CorpusStore store(dir.path());
    id = store.Ingest(Doc("Oil slips", "Brent fell 2%.", "2023-10-02T11:00:00Z")).id;
    store.Ingest(Doc("Gold climbs", ""));
  }
  CorpusStore reopened(dir.path());
  EXPECT_EQ(reopened.size(), 2u);
  auto doc = reopened.Get(id);
  ASSERT_TRUE(doc);
  EXPECT_EQ(doc->body, "Brent fell 2%.");
  EXPECT_EQ(FormatRfc3339(*doc->published_at), "2023-10-02T11:00:00Z");
  EXPECT_FALSE(reopened.Ingest(Doc("Gold climbs", "")).inserted);
  EXPECT_TRUE(reopened.IndexConsistent());
}

TEST(CorpusStoreTest, CandidatesRankedBySharedTokens) {
  CorpusStore store;
  auto a = store.Ingest(Doc("apple banana cherry", "")).id;
  auto b = store.Ingest(Doc("apple banana", "")).id;
  auto c = store.Ingest(Doc("apple", "durian")).id;
  store.Ingest(Doc("elderberry", ""));
  auto hits = store.QueryCandidates({"apple", "banana", "cherry"}, std::nullopt);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].id, a);
  EXPECT_EQ(hits[1].id, b);
  EXPECT_EQ(hits[2].id, c);
  EXPECT_THROW(store.QueryCandidates({}, std::nullopt), Error);
}

TEST(CorpusStoreTest, RangeFiltersAndDropsUndated) {
  CorpusStore store;
  store.Ingest(Doc("rates up", "", "2023-10-01T00:00:00Z"));
  store.Ingest(Doc("rates down", "", "2023-10-05T00:00:00Z"));
  store.Ingest(Doc("rates flat", ""));
  auto range = TimeRange::Make(*ParseRfc3339("2023-09-30T00:00:00Z"),
                               *ParseRfc3339("2023-10-02T00:00:00Z"));
  auto hits = store.QueryCandidates({"rates"}, range);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].title, "rates up");
  EXPECT_EQ(store.QueryCandidates({"rates"}, std::nullopt).size(), 3u);
  EXPECT_THROW(TimeRange::Make(range.end, range.start), Error);
}

TEST(CorpusStoreTest, PhraseFilter) {
  CorpusStore store;
  store.Ingest(Doc("bear call defended", ""));
  store.Ingest(Doc("call the bear", ""));
  CandidateOptions opts;
  opts.phrases = {{"bear", "call"}};
  auto hits = store.QueryCandidates({"bear", "call"}, std::nullopt, opts);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].title, "bear call defended");
}

TEST(CorpusStoreTest, IndexMatchesFullScan) {
  Rng rng(12);
  CorpusStore store;
  for (int i = 0; i < 200; ++i) {
    auto toks = gen::TokenList(rng, 10, 40);
    std::string title;
    for (auto& t : toks) title += t + " ";
    if (IsBlank(title)) continue;
    store.Ingest(Doc(title, ""));
  }
  EXPECT_TRUE(store.IndexConsistent());
  auto docs = store.AllDocs();
  for (int trial = 0; trial < 100; ++trial) {
    auto qs = gen::TokenList(rng, 5, 40);
    TokenSet q(qs.begin(), qs.end());
    if (q.empty()) continue;
    std::set<std::string> expected;
    for (const auto& d : docs) {
      auto toks = DocumentTokens(d);
      for (const auto& t : q) {
        if (toks.contains(t)) expected.insert(d.id);
      }
    }
    std::set<std::string> got;
    for (const auto& d : store.QueryCandidates(q, std::nullopt)) got.insert(d.id);
    EXPECT_EQ(got, expected);
  }
  auto before = store.IndexSnapshot();
  store.RebuildIndex();
  EXPECT_EQ(store.IndexSnapshot().postings, before.postings);
}

TEST(CorpusStoreTest, ConcurrentReadersAndWriter) {
  CorpusStore store;
  for (int i = 0; i < 20; ++i) store.Ingest(Doc("seed doc " + std::to_string(i), "common"));
  std::atomic<bool> done{false};
  std::atomic<int> failures{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 3; ++r) {
    readers.emplace_back([&] {
      while (!done) {
        auto hits = store.QueryCandidates({"common"}, std::nullopt);
        if (hits.size() < 20) ++failures;
        for (const auto& h : hits) {
          if (!store.Get(h.id)) ++failures;
        }
      }
    });
  }
  std::thread writer([&] {
    for (int i = 0; i < 200; ++i) {
      store.Ingest(Doc("new doc " + std::to_string(i), "common"));
      if (i % 50 == 0) store.RebuildIndex();
    }
  });
  writer.join();
  done = true;
  for (auto& t : readers) t.join();
  EXPECT_EQ(failures.load(), 0);
  EXPECT_EQ(store.size(), 220u);
  EXPECT_TRUE(store.IndexConsistent());
}

TEST(CorpusLineTest, ParseErrorsCarryLineNumbers) {
  try {
    ParseCorpusLine("{not json", 7);
    FAIL();
  } catch (const LineError& e) {
    EXPECT_EQ(e.line_no(), 7u);
    EXPECT_EQ(e.code(), ErrorCode::kMalformedLine);
  }
  EXPECT_THROW(ParseCorpusLine(R"({"title":"x","source_kind":"blog"})", 1), LineError);
  auto d = ParseCorpusLine(R"({"title":"x","body":"y","source_kind":"social"})", 1);
  EXPECT_EQ(d.source_kind, SourceKind::kSocial);
  EXPECT_EQ(d.id, ContentId("x", "y", std::nullopt));
  auto back = ParseCorpusLine(CorpusLineFromDoc(d), 1);
  EXPECT_EQ(back.id, d.id);
}

}  // namespace
}  // namespace finrag

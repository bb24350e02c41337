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


// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "finrag/backend.hpp"
#include "finrag/bpe.hpp"
#include "finrag/cli.hpp"
#include "finrag/corpus_store.hpp"
#include "finrag/dataset_formatter.hpp"
#include "finrag/evaluation.hpp"
#include "finrag/retrieval.hpp"
#include "finrag/toy_lm.hpp"
#include "finrag/util.hpp"
#include "generators.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "test_paths.hpp"

namespace finrag {
namespace {

namespace fs = std::filesystem;

// Tolerances and sizes.
constexpr int kOverlapPairs = 1000;
constexpr double kGradStep = 1e-5;
constexpr double kGradTolerance = 1e-4;
constexpr std::size_t kGradSequences = 10;
constexpr std::size_t kGradCoordinates = 120;
constexpr std::size_t kGradSequenceLength = 16;
constexpr int kNllPairs = 100;
constexpr double kNllRelTolerance = 1e-10;
constexpr double kUniformNllTolerance = 1e-9;
constexpr double kPipelineMinAccuracy = 0.95;
constexpr double kPipelineMinMacroF1 = 0.95;
constexpr std::size_t kPipelineRecords = 300;
constexpr double kRagMinDelta = 0.30;
constexpr int kMetricsTrials = 1000;
constexpr double kMetricsTolerance = 1e-12;
constexpr int kBpeStrings = 1000;
constexpr std::size_t kBpeMaxBytes = 1024;
constexpr int kAdversarialLabels = 50;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome Fail(std::string detail) { return {false, std::move(detail)}; }

std::string Fmt(const char* fmt, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c);
  return buf;
}

// 1 -------------------------------------------------------------------------
Outcome OverlapOracle() {
  Rng rng(101);
  for (int i = 0; i < kOverlapPairs; ++i) {
    auto xs = gen::TokenList(rng, 20, 25);
    auto ys = gen::TokenList(rng, 20, 25);
    auto expected = oracle::Overlap(xs, ys);
    double got = Overlap(TokenSet(xs.begin(), xs.end()), TokenSet(ys.begin(), ys.end()));
    // Both sides divide the same two integers, so equality must be exact.
    if (got != expected.value()) {
      return Fail("pair " + std::to_string(i) + ": " + std::to_string(got) + " vs " +
                  std::to_string(expected.num) + "/" + std::to_string(expected.den));
    }
  }
  return {true, std::to_string(kOverlapPairs) + " pairs exact"};
}

// 2 -------------------------------------------------------------------------
Outcome RetrievalFixture() {
  const std::string expected_bundle =
      "Energizer (ENR) stock climbed off its lows after JPMorgan analysts defended "
      "their bear call.";
  CorpusStore store;
  std::istringstream in(ReadFile(testing::FixturePath("retrieval_corpus.jsonl")));
  std::string line;
  std::size_t no = 0;
  std::string boundary_id;
  while (std::getline(in, line)) {
    auto doc = ParseCorpusLine(line, ++no);
    if (doc.title == "Energizer JPMorgan bear call recap") boundary_id = doc.id;
    store.Ingest(doc);
  }
  auto query = PreprocessQuery("$ENR - Energizer shakes off JPMorgan\xE2\x80\x99s bear call.",
                               ParseRfc3339("2023-10-02T14:00:00Z"));
  RetrievalTrace trace;
  auto bundle = RetrieveContext(query, store, {}, &trace);
  if (bundle.concatenated != expected_bundle) {
    return Fail("bundle was \"" + bundle.concatenated + "\"");
  }
  bool boundary_seen = false;
  for (const auto& c : trace.candidates) {
    if (c.doc_id != boundary_id) continue;
    boundary_seen = true;
    if (c.doc_score != 0.8 || c.kept) return Fail("boundary document not excluded");
  }
  if (!boundary_seen) return Fail("boundary document was not a candidate");
  if (bundle.doc_scores.contains(boundary_id)) return Fail("boundary doc in bundle");
  return {true, "bundle byte-exact, doc at 0.8 excluded"};
}

// 3 -------------------------------------------------------------------------
Outcome GradientCheck() {
  const ModelShape shape{513, 32, 8};  // 512-entry vocabulary plus end-of-text
  Rng rng(303);
  double worst_vector = 0.0;     // per sequence, double-precision differences
  double worst_coordinate = 0.0; // per coordinate, long-double differences
  double worst_coordinate_double = 0.0;
  for (std::size_t s = 0; s < kGradSequences; ++s) {
    auto params = ToyLMParams::Random(shape, 1000 + s, 0.02);
    TokenSequence seq(kGradSequenceLength);
    for (auto& t : seq) t = static_cast<TokenId>(rng.Below(shape.vocab_size));
    const ToyLMParams grad = ClmGrad(params, seq);
    std::vector<double> theta(params.data().begin(), params.data().end());
    ToyLMParams probe = params;

    const std::size_t e_size = shape.vocab_size * shape.embed_dim;
    const std::size_t u_size = shape.window * shape.embed_dim * shape.vocab_size;
    std::vector<TokenId> rows(seq.begin(), seq.end());
    rows.push_back(params.pad_id());
    long double diff_sq = 0.0L, a_sq = 0.0L, n_sq = 0.0L;
    for (std::size_t i = 0; i < kGradCoordinates; ++i) {
      std::size_t idx = i % 3 == 0   ? rows[rng.Below(rows.size())] * shape.embed_dim +
                                           rng.Below(shape.embed_dim)
                        : i % 3 == 1 ? e_size + rng.Below(u_size)
                                     : e_size + u_size + rng.Below(shape.vocab_size);
      const double saved = theta[idx];
      const double up_x = saved + kGradStep, down_x = saved - kGradStep;
      probe.data()[idx] = up_x;
      const double up = ClmNll(probe, seq);
      probe.data()[idx] = down_x;
      const double down = ClmNll(probe, seq);
      probe.data()[idx] = saved;
      const double numeric = (up - down) / (2.0 * kGradStep);

      theta[idx] = up_x;
      const long double up_l = oracle::Nll(theta, shape.vocab_size, shape.embed_dim,
                                           shape.window, seq);
      theta[idx] = down_x;
      const long double down_l = oracle::Nll(theta, shape.vocab_size, shape.embed_dim,
                                             shape.window, seq);
      theta[idx] = saved;
      const double numeric_l = static_cast<double>(
          (up_l - down_l) / (static_cast<long double>(up_x) - down_x));

      const double analytic = grad.data()[idx];
      diff_sq += (long double)(analytic - numeric) * (analytic - numeric);
      a_sq += (long double)analytic * analytic;
      n_sq += (long double)numeric * numeric;
      auto rel = [&](double n) {
        return std::abs(analytic - n) / std::max({std::abs(analytic), std::abs(n), 1e-12});
      };
      worst_coordinate = std::max(worst_coordinate, rel(numeric_l));
      worst_coordinate_double = std::max(worst_coordinate_double, rel(numeric));
    }
    const double vec = static_cast<double>(std::sqrt(diff_sq) /
                                           std::max(std::sqrt(a_sq), std::sqrt(n_sq)));
    worst_vector = std::max(worst_vector, vec);
  }
  std::string detail = Fmt("vector rel err %.2e, per-coordinate %.2e (double-only %.2e)",
                           worst_vector, worst_coordinate, worst_coordinate_double);
  return {worst_vector < kGradTolerance && worst_coordinate < kGradTolerance, detail};
}

// 4 -------------------------------------------------------------------------
Outcome NllOracle() {
  Rng rng(404);
  double worst = 0.0;
  for (int i = 0; i < kNllPairs; ++i) {
    ModelShape shape{2 + rng.Below(60), 1 + rng.Below(8), 1 + rng.Below(6)};
    auto params = ToyLMParams::Random(shape, rng.NextU64(), 0.05 + rng.Uniform());
    TokenSequence seq(2 + rng.Below(40));
    for (auto& t : seq) t = static_cast<TokenId>(rng.Below(shape.vocab_size));
    std::vector<double> theta(params.data().begin(), params.data().end());
    const long double expected =
        oracle::Nll(theta, shape.vocab_size, shape.embed_dim, shape.window, seq);
    const double got = ClmNll(params, seq);
    worst = std::max(worst, static_cast<double>(std::abs(got - expected) / expected));
  }
  double worst_uniform = 0.0;
  for (std::size_t v : {2u, 4u, 513u}) {
    for (std::size_t t : {2u, 5u, 64u}) {
      ToyLMParams zero(ModelShape{v, 4, 3});
      TokenSequence seq(t);
      for (std::size_t j = 0; j < t; ++j) seq[j] = static_cast<TokenId>(rng.Below(v));
      worst_uniform = std::max(
          worst_uniform, std::abs(ClmNll(zero, seq) - double(t - 1) * std::log(double(v))));
    }
  }
  return {worst < kNllRelTolerance && worst_uniform < kUniformNllTolerance,
          Fmt("max rel err %.2e, uniform abs err %.2e", worst, worst_uniform)};
}

// 5 -------------------------------------------------------------------------
std::string SeparableRaw(std::size_t n, std::uint64_t seed) {
  const char* companies[] = {"Acme",  "Globex", "Initech",  "Hooli",   "Umbrella", "Stark",
                             "Wayne", "Wonka",  "Vandelay", "Tyrell",  "Soylent",  "Cyberdyne"};
  const char* subjects[] = {"shares", "stock", "revenue", "earnings", "outlook", "guidance"};
  const char* cues[3][5] = {{"plunge", "tumble", "sink", "slump", "crash"},
                            {"hold", "hover", "stall", "idle", "pause"},
                            {"soar", "surge", "climb", "jump", "rally"}};
  const char* labels[] = {"negative", "neutral", "positive"};
  Rng rng(seed);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = i % 3;
    nlohmann::json rec = {{"text", std::string(companies[rng.Below(12)]) + " " +
                                       subjects[rng.Below(6)] + " " + cues[c][rng.Below(5)]},
                          {"label", labels[c]}};
    out += rec.dump() + "\n";
  }
  return out;
}

struct CliRun {
  int code;
  std::string out, err;
};

CliRun Cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

Outcome ToyPipeline() {
  testing::TempDir dir;
  const std::string d = dir.path().string();
  WriteFile(d + "/raw.jsonl", SeparableRaw(kPipelineRecords, 505));
  std::vector<std::vector<std::string>> steps = {
      {"--out-dir", d, "--seed", "5", "format", "--input", d + "/raw.jsonl"},
      {"--out-dir", d, "--seed", "5", "train", "--profile", "toy"},
      {"--out-dir", d, "--seed", "5", "eval", "--backend", "toy", "--rag", "off"},
  };
  for (const auto& args : steps) {
    auto r = Cli(args);
    if (r.code != 0) return Fail(args[4] + " exited " + std::to_string(r.code) + ": " + r.err);
  }
  auto report = ReportFromJson(ReadFile(d + "/report_rag_off.json"));
  auto csv = ReadFile(d + "/loss.csv");
  std::istringstream lines(csv);
  std::string line, first, last;
  std::getline(lines, line);  // header
  std::getline(lines, first);
  last = first;
  while (std::getline(lines, line)) last = line;
  double initial = std::stod(first.substr(first.find(',') + 1));
  double final_loss = std::stod(last.substr(last.find(',') + 1));
  bool pass = report.accuracy >= kPipelineMinAccuracy && report.macro_f1 >= kPipelineMinMacroF1 &&
              report.n == kPipelineRecords && final_loss < initial;
  return {pass, Fmt("acc %.3f, macro F1 %.3f, loss %.3f -> ", report.accuracy,
                    report.macro_f1, initial) +
                    Fmt("%.3f", final_loss)};
}

// 6 -------------------------------------------------------------------------
struct RagFixture {
  std::string raw;     // 60 headlines, canonical labels
  std::string corpus;  // corpus JSONL
};

RagFixture MakeRagFixture() {
  const char* stems[] = {"Alder", "Birch", "Cedar", "Dogwood", "Elm", "Fir",
                         "Ginkgo", "Hazel", "Juniper", "Larch"};
  const char* tails[] = {"tech", "works", "labs", "foods", "motors", "energy"};
  const char* topics[] = {"quarterly", "annual", "regional", "product", "pricing"};
  const char* labels[] = {"negative", "neutral", "positive"};
  const char* context[] = {
      "{name} {topic} update: brokers downgrade the shares after sales miss forecasts.",
      "{name} {topic} update: the board scheduled its next routine meeting.",
      "{name} {topic} update: brokers upgrade the shares after sales beat forecasts."};
  RagFixture f;
  for (int i = 0; i < 60; ++i) {
    std::string name = std::string(stems[i % 10]) + tails[i / 10];
    std::string topic = topics[i % 5];
    int label = i % 3;
    std::string headline = name + " " + topic + " update";
    f.raw += nlohmann::json({{"text", headline},
                             {"label", labels[label]},
                             {"timestamp", "2024-03-01T12:00:00Z"}})
                 .dump() +
             "\n";
    std::string body = context[label];
    body.replace(body.find("{name}"), 6, name);
    body.replace(body.find("{topic}"), 7, topic);
    f.corpus += nlohmann::json({{"title", name + " briefing"},
                                {"body", body},
                                {"source_kind", "news"},
                                {"published_at", "2024-03-01T08:00:00Z"}})
                    .dump() +
                "\n";
  }
  return f;
}

Outcome RagImprovement() {
  auto fixture = MakeRagFixture();
  std::istringstream raw(fixture.raw);
  auto records = FormatDataset(raw, DefaultTemplates(), FormatOptions{});
  CorpusStore store;
  std::istringstream corpus(fixture.corpus);
  std::string line;
  std::size_t no = 0;
  while (std::getline(corpus, line)) store.Ingest(ParseCorpusLine(line, ++no));

  MockBackend mock;
  for (const auto& r : records) {
    if (mock.Classify(r.input) != "neutral") return Fail("headline carries a cue: " + r.input);
  }
  EvalOptions off, on;
  on.use_rag = true;
  auto a = RunEval(records, mock, nullptr, off);
  auto b = RunEval(records, mock, &store, on);
  std::size_t neutral = 0;
  for (const auto& r : records) neutral += r.output == SentimentLabel::kNeutral;
  const double base_rate = double(neutral) / double(records.size());
  const double delta = b.report.accuracy - a.report.accuracy;
  bool pass = records.size() == 60 && a.report.accuracy == base_rate && delta >= kRagMinDelta;
  return {pass, Fmt("off %.3f (neutral base rate %.3f), on %.3f", a.report.accuracy, base_rate,
                    b.report.accuracy)};
}

// 7 -------------------------------------------------------------------------
Outcome MetricsOracle() {
  Rng rng(707);
  double worst = 0.0;
  for (int trial = 0; trial < kMetricsTrials; ++trial) {
    std::size_t n = 1 + rng.Below(200);
    std::vector<int> gold(n), pred(n);
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = static_cast<int>(rng.Below(3));
      pred[i] = static_cast<int>(rng.Below(3));
      cm.Add(static_cast<SentimentLabel>(gold[i]), static_cast<SentimentLabel>(pred[i]));
    }
    auto r = ComputeMetrics(cm);
    auto o = oracle::MetricsFromLists(gold, pred);
    auto upd = [&](double x, double y) { worst = std::max(worst, std::abs(x - y)); };
    upd(r.accuracy, o.accuracy);
    upd(r.macro_f1, o.macro_f1);
    upd(r.weighted_f1, o.weighted_f1);
    for (int c = 0; c < 3; ++c) {
      upd(r.precision[c], o.precision[c]);
      upd(r.recall[c], o.recall[c]);
      upd(r.f1[c], o.f1[c]);
    }
  }
  ConfusionMatrix hand;
  hand.counts = {{{5, 1, 0}, {2, 6, 2}, {0, 1, 3}}};
  auto h = ComputeMetrics(hand);
  bool example = std::abs(h.accuracy - 0.7) < 5e-5 && std::abs(h.f1[0] - 0.7692) < 5e-5;
  return {worst < kMetricsTolerance && example,
          Fmt("max abs diff %.2e; example acc %.4f, f1(neg) %.4f", worst, h.accuracy, h.f1[0])};
}

// 8 -------------------------------------------------------------------------
Outcome BpeRoundTrip() {
  Rng rng(808);
  std::vector<std::string> corpus;
  for (int i = 0; i < 60; ++i) corpus.push_back(gen::Utf8String(rng, 400));
  auto vocab = TrainBpe(corpus, 512);
  auto again = TrainBpe(corpus, 512);
  if (vocab.MergePairs() != again.MergePairs()) return Fail("merge lists differ between runs");
  for (int i = 0; i < kBpeStrings; ++i) {
    std::string s = gen::Utf8String(rng, kBpeMaxBytes);
    if (vocab.Decode(vocab.Encode(s)) != s) return Fail("string " + std::to_string(i));
  }
  return {true, std::to_string(kBpeStrings) + " strings, " +
                    std::to_string(vocab.merges().size()) + " identical merges"};
}

// 9 -------------------------------------------------------------------------
Outcome LabelMapping() {
  struct Case {
    std::string text;
    SentimentLabel want;
  };
  std::vector<Case> cases = {
      {"The sentiment is Positive.", SentimentLabel::kPositive},
      {"negative overall, despite positive notes", SentimentLabel::kNegative},
      {"I cannot determine the sentiment.", SentimentLabel::kNeutral},
  };
  for (const auto& c : cases) {
    if (MapOutputToLabel(c.text) != c.want) return Fail("example \"" + c.text + "\"");
  }
  const char* words[] = {"positive", "Neutral", "NEGATIVE", "posit", "neutra", "negativ",
                         "not ", "non", "-", " ", "ly", "\xC3\xA9"};
  Rng rng(909);
  for (int i = 0; i < kAdversarialLabels; ++i) {
    std::string text;
    for (std::size_t k = 2 + rng.Below(5); k > 0; --k) text += words[rng.Below(12)];
    if (static_cast<int>(MapOutputToLabel(text)) != oracle::MapLabel(text)) {
      return Fail("adversarial \"" + text + "\"");
    }
  }
  return {true, "3 examples + " + std::to_string(kAdversarialLabels) + " adversarial strings"};
}

// 10 ------------------------------------------------------------------------
Outcome EvalDeterminism() {
  testing::TempDir dir;
  const std::string d = dir.path().string();
  auto fixture = MakeRagFixture();
  WriteFile(d + "/raw.jsonl", fixture.raw);
  WriteFile(d + "/corpus.jsonl", fixture.corpus);
  auto fmt = Cli({"--out-dir", d, "--seed", "10", "format", "--input", d + "/raw.jsonl"});
  auto ing = Cli({"--out-dir", d, "ingest", "--source", d + "/corpus.jsonl"});
  if (fmt.code != 0 || ing.code != 0) return Fail("setup failed: " + fmt.err + ing.err);
  for (const char* sub : {"a", "b"}) {
    auto r = Cli({"--seed", "10", "--out-dir", d + "/" + sub, "eval", "--data",
                  d + "/formatted.jsonl", "--store", d + "/corpus", "--backend", "mock"});
    if (r.code != 0) return Fail(std::string("eval ") + sub + ": " + r.err);
  }
  for (const char* f : {"predictions_rag_off.jsonl", "predictions_rag_on.jsonl",
                        "report_rag_off.json", "report_rag_on.json", "report.md",
                        "report.json"}) {
    if (ReadFile(d + "/a/" + f) != ReadFile(d + "/b/" + f)) {
      return Fail(std::string(f) + " differs");
    }
  }
  return {true, "6 artifacts byte-identical"};
}

}  // namespace
}  // namespace finrag

int main() {
  using finrag::Outcome;
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"overlap oracle equivalence", finrag::OverlapOracle},
      {"retrieval fixture trace", finrag::RetrievalFixture},
      {"gradient check", finrag::GradientCheck},
      {"NLL oracle", finrag::NllOracle},
      {"end-to-end toy pipeline", finrag::ToyPipeline},
      {"RAG directional improvement", finrag::RagImprovement},
      {"metrics oracle", finrag::MetricsOracle},
      {"BPE roundtrip and determinism", finrag::BpeRoundTrip},
      {"label-mapping precedence", finrag::LabelMapping},
      {"eval determinism", finrag::EvalDeterminism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %2zu %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}

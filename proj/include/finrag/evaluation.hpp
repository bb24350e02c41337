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

#ifndef FINRAG_EVALUATION_HPP_
#define FINRAG_EVALUATION_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "finrag/backend.hpp"
#include "finrag/corpus_store.hpp"
#include "finrag/dataset_formatter.hpp"
#include "finrag/retrieval.hpp"

namespace finrag {

/// Looks for "negative", then "neutral", then "positive" anywhere in `text`,
/// ignoring case. The first word found decides; no match means neutral.
SentimentLabel MapOutputToLabel(std::string_view text);

struct Prediction {
  std::string record_id;
  std::string raw_output;
  SentimentLabel mapped = SentimentLabel::kNeutral;
  SentimentLabel gold = SentimentLabel::kNeutral;
  bool used_rag = false;
  std::size_t bundle_size = 0;
  std::optional<std::string> error;
};

std::string PredictionToJson(const Prediction& prediction);

/// counts[gold][predicted].
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, 3>, 3> counts{};

  void Add(SentimentLabel gold, SentimentLabel predicted);
  std::uint64_t total() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix Accumulate(std::span<const Prediction> predictions);

struct EvalReport {
  std::string name;
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::array<double, 3> precision{};
  std::array<double, 3> recall{};
  std::array<double, 3> f1{};
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::uint64_t n = 0;
  std::uint64_t errors = 0;
  std::string config_fingerprint;
};

/// Accuracy, per-class precision/recall/F1, macro and support-weighted F1.
/// Empty rows or columns give 0 for the undefined ratio. Throws
/// Error(kEmptyMatrix) when the matrix is all zeros.
EvalReport ComputeMetrics(const ConfusionMatrix& cm);

struct EvalOptions {
  bool use_rag = false;
  RetrievalOptions retrieval;
  /// Budget for the augmented content, counted by `counter`.
  std::size_t token_budget = 512;
  TokenCounter counter = WordCounter();
  CompletionParams params;
  std::size_t max_in_flight = 4;
};

struct EvalRun {
  EvalReport report;
  std::vector<Prediction> predictions;
};

/// Classifies every record, optionally prepending retrieved context. Backend
/// failures are recorded as neutral predictions carrying an error message.
/// `store` may be null when use_rag is false. Throws Error(kEmptyDataset) for
/// an empty dataset.
EvalRun RunEval(std::span<const InstructionRecord> dataset,
                CompletionBackend& backend, const CorpusStore* store,
                const EvalOptions& options);

enum class ReportFormat { kMarkdown, kJson };

/// Markdown: one table row per report with Acc, F1 (macro) and F1
/// (weighted) to three decimals. JSON: an array with every field.
std::string RenderReport(std::span<const EvalReport> reports,
                         ReportFormat format);

std::string ReportToJson(const EvalReport& report);
EvalReport ReportFromJson(std::string_view text);

}  // namespace finrag

#endif  // FINRAG_EVALUATION_HPP_

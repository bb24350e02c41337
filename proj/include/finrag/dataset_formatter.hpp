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

// Turns labeled sentiment datasets into instruction-following records of the
// form "Human: <instruction> <input>, Assistant: <label>".

#ifndef FINRAG_DATASET_FORMATTER_HPP_
#define FINRAG_DATASET_FORMATTER_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "finrag/util.hpp"

namespace finrag {

/// Three-way sentiment class. Enumerator order is the serialization order.
enum class SentimentLabel : std::uint8_t {
  kNegative = 0,
  kNeutral = 1,
  kPositive = 2,
};

inline constexpr std::array<SentimentLabel, 3> kAllLabels = {
    SentimentLabel::kNegative, SentimentLabel::kNeutral,
    SentimentLabel::kPositive};

/// Lowercase label word: "negative", "neutral" or "positive".
std::string_view LabelWord(SentimentLabel label);
/// Inverse of LabelWord (exact lowercase match only).
std::optional<SentimentLabel> ParseLabelWord(std::string_view word);

enum class LabelScheme {
  kTwitter,    // Bearish / Bullish / Neutral
  kFiqa,       // negative / neutral / positive
  kFpb,        // negative / neutral / positive
  kCanonical,  // label words
};

std::optional<LabelScheme> ParseLabelScheme(std::string_view name);
std::string_view LabelSchemeName(LabelScheme scheme);

using RawLabel = std::variant<std::string, std::int64_t>;

std::string RawLabelToString(const RawLabel& raw);

/// Maps a dataset's native label to the canonical class.
///
/// String labels are matched case-insensitively after trimming. Integer
/// labels follow each dataset's published legend: twitter uses
/// 0=Bearish, 1=Bullish, 2=Neutral; every other scheme uses
/// 0=negative, 1=neutral, 2=positive.
///
/// Throws Error(kUnknownLabel) for values outside the scheme's domain.
SentimentLabel CanonicalizeLabel(const RawLabel& raw, LabelScheme scheme);

struct RawRecord {
  std::string text;
  RawLabel raw_label;
  std::optional<UtcTime> timestamp;
  std::string source_id;
};

struct InstructionTemplate {
  int id = 0;
  std::string text;
};

inline constexpr std::size_t kTemplateCount = 10;

std::vector<InstructionTemplate> DefaultTemplates();

/// Loads templates from a JSON file holding either an array of strings or an
/// array of {"id": int, "text": string} objects. With no path the built-in
/// set is returned. Result is sorted by id.
std::vector<InstructionTemplate> LoadTemplates(
    const std::optional<std::string>& path);
/// Same validation applied to an in-memory list.
std::vector<InstructionTemplate> ValidateTemplates(
    std::vector<InstructionTemplate> templates);

/// Template chosen for record `index` under `seed`. Counter-based, so the
/// choice does not depend on the order in which records are processed.
std::size_t TemplateIndex(std::uint64_t seed, std::uint64_t index);

struct InstructionRecord {
  std::string instruction;
  std::string input;
  SentimentLabel output = SentimentLabel::kNeutral;
  std::string rendered;
  std::optional<UtcTime> timestamp;  // carried through for retrieval
};

inline constexpr std::string_view kHumanPrefix = "Human: ";
inline constexpr std::string_view kAssistantDelimiter = ", Assistant: ";

std::string RenderRecord(std::string_view instruction, std::string_view input,
                         SentimentLabel label);

InstructionRecord FormatRecord(const RawRecord& record, SentimentLabel label,
                               const std::vector<InstructionTemplate>& templates,
                               std::uint64_t seed, std::uint64_t index);

struct ParsedRendering {
  std::string instruction;
  std::string input;
  SentimentLabel label;
};

/// Recovers (instruction, input, label) from a rendered record. The
/// instruction is identified by matching against `templates`.
std::optional<ParsedRendering> ParseRendered(
    std::string_view rendered,
    const std::vector<InstructionTemplate>& templates);

/// Parses one input JSONL object. Throws LineError(kMalformedLine).
RawRecord ParseRawRecordLine(std::string_view line, std::size_t line_no);

std::string InstructionRecordToJson(const InstructionRecord& record);
/// Reads one output-format JSONL object back into a record.
InstructionRecord InstructionRecordFromJson(std::string_view line,
                                            std::size_t line_no);

struct FormatSummary {
  std::array<std::size_t, 3> per_class{};  // indexed by SentimentLabel
  std::size_t records = 0;
  std::size_t skipped = 0;
  std::vector<std::string> problems;  // one message per skipped line
};

struct FormatOptions {
  LabelScheme scheme = LabelScheme::kCanonical;
  std::uint64_t seed = 0;
  bool skip_bad = false;
};

/// Streams JSONL records from `in`, calling `sink` once per formatted record
/// in input order. Blank lines are ignored. Without skip_bad the first bad
/// line throws a LineError (kMalformedLine or kUnknownLabel). The record
/// ordinal used for template selection is the 0-based count of non-blank
/// input lines.
FormatSummary FormatDataset(
    std::istream& in, const std::vector<InstructionTemplate>& templates,
    const FormatOptions& options,
    const std::function<void(const InstructionRecord&)>& sink);

/// Convenience overload collecting the records.
std::vector<InstructionRecord> FormatDataset(
    std::istream& in, const std::vector<InstructionTemplate>& templates,
    const FormatOptions& options, FormatSummary* summary = nullptr);

}  // namespace finrag

#endif  // FINRAG_DATASET_FORMATTER_HPP_

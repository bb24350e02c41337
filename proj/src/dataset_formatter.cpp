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

#include "finrag/dataset_formatter.hpp"

#include <algorithm>
#include <istream>
#include <set>

#include "finrag/error.hpp"
#include "json.hpp"

namespace finrag {

using json = nlohmann::json;

std::string_view LabelWord(SentimentLabel label) {
  switch (label) {
    case SentimentLabel::kNegative: return "negative";
    case SentimentLabel::kNeutral: return "neutral";
    case SentimentLabel::kPositive: return "positive";
  }
  return "neutral";
}

std::optional<SentimentLabel> ParseLabelWord(std::string_view word) {
  for (auto label : kAllLabels) {
    if (word == LabelWord(label)) return label;
  }
  return std::nullopt;
}

std::optional<LabelScheme> ParseLabelScheme(std::string_view name) {
  std::string lower = AsciiLower(Trim(name));
  if (lower == "twitter") return LabelScheme::kTwitter;
  if (lower == "fiqa") return LabelScheme::kFiqa;
  if (lower == "fpb" || lower == "fpb-integer") return LabelScheme::kFpb;
  if (lower == "canonical") return LabelScheme::kCanonical;
  return std::nullopt;
}

std::string_view LabelSchemeName(LabelScheme scheme) {
  switch (scheme) {
    case LabelScheme::kTwitter: return "twitter";
    case LabelScheme::kFiqa: return "fiqa";
    case LabelScheme::kFpb: return "fpb";
    case LabelScheme::kCanonical: return "canonical";
  }
  return "canonical";
}

std::string RawLabelToString(const RawLabel& raw) {
  if (const auto* s = std::get_if<std::string>(&raw)) return *s;
  return std::to_string(std::get<std::int64_t>(raw));
}

SentimentLabel CanonicalizeLabel(const RawLabel& raw, LabelScheme scheme) {
  auto unknown = [&]() {
    return Error(ErrorCode::kUnknownLabel,
                 "'" + RawLabelToString(raw) + "' is not a " +
                     std::string(LabelSchemeName(scheme)) + " label");
  };
  if (const auto* value = std::get_if<std::int64_t>(&raw)) {
    if (scheme == LabelScheme::kTwitter) {
      switch (*value) {
        case 0: return SentimentLabel::kNegative;  // Bearish
        case 1: return SentimentLabel::kPositive;  // Bullish
        case 2: return SentimentLabel::kNeutral;
        default: throw unknown();
      }
    }
    switch (*value) {
      case 0: return SentimentLabel::kNegative;
      case 1: return SentimentLabel::kNeutral;
      case 2: return SentimentLabel::kPositive;
      default: throw unknown();
    }
  }
  std::string word = AsciiLower(Trim(std::get<std::string>(raw)));
  if (scheme == LabelScheme::kTwitter) {
    if (word == "bearish") return SentimentLabel::kNegative;
    if (word == "bullish") return SentimentLabel::kPositive;
    if (word == "neutral") return SentimentLabel::kNeutral;
    throw unknown();
  }
  if (auto label = ParseLabelWord(word)) return *label;
  throw unknown();
}

std::vector<InstructionTemplate> DefaultTemplates() {
  static const char* const kTexts[kTemplateCount] = {
      "What is the sentiment of this financial news? Answer with negative, "
      "neutral, or positive.",
      "What is the sentiment of this tweet? Please choose an answer from "
      "{negative/neutral/positive}.",
      "Classify the sentiment of the following financial headline as "
      "negative, neutral, or positive.",
      "Is the tone of this market news negative, neutral, or positive?",
      "Determine whether this financial statement expresses a negative, "
      "neutral, or positive sentiment.",
      "Read the following news flash and label its sentiment: negative, "
      "neutral, or positive.",
      "How would an investor read this headline: negative, neutral, or "
      "positive?",
      "Assess the market sentiment conveyed by this text. Reply with "
      "negative, neutral, or positive.",
      "From a financial perspective, is the following post negative, "
      "neutral, or positive?",
      "Give the sentiment of this financial tweet as one word: negative, "
      "neutral, or positive.",
  };
  std::vector<InstructionTemplate> out;
  out.reserve(kTemplateCount);
  for (std::size_t i = 0; i < kTemplateCount; ++i) {
    out.push_back({static_cast<int>(i), kTexts[i]});
  }
  return out;
}

std::vector<InstructionTemplate> ValidateTemplates(
    std::vector<InstructionTemplate> templates) {
  if (templates.size() != kTemplateCount) {
    throw Error(ErrorCode::kTemplateCountMismatch,
                "expected " + std::to_string(kTemplateCount) +
                    " templates, got " + std::to_string(templates.size()));
  }
  std::set<int> ids;
  for (const auto& t : templates) {
    if (IsBlank(t.text)) {
      throw Error(ErrorCode::kEmptyTemplate,
                  "template " + std::to_string(t.id) + " is empty");
    }
    if (t.id < 0 || t.id >= static_cast<int>(kTemplateCount) ||
        !ids.insert(t.id).second) {
      throw Error(ErrorCode::kInvalidArgument,
                  "template ids must be unique and within 0..9");
    }
  }
  std::sort(templates.begin(), templates.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return templates;
}

std::vector<InstructionTemplate> LoadTemplates(
    const std::optional<std::string>& path) {
  if (!path) return DefaultTemplates();
  json doc;
  try {
    doc = json::parse(ReadFile(*path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                "template file " + *path + ": " + e.what());
  }
  if (!doc.is_array()) {
    throw Error(ErrorCode::kInvalidArgument,
                "template file must hold a JSON array");
  }
  std::vector<InstructionTemplate> templates;
  int next_id = 0;
  for (const auto& entry : doc) {
    if (entry.is_string()) {
      templates.push_back({next_id++, entry.get<std::string>()});
    } else if (entry.is_object() && entry.contains("text") &&
               entry["text"].is_string()) {
      int id = entry.value("id", next_id);
      templates.push_back({id, entry["text"].get<std::string>()});
      next_id = id + 1;
    } else {
      throw Error(ErrorCode::kInvalidArgument,
                  "template entries must be strings or {id, text} objects");
    }
  }
  return ValidateTemplates(std::move(templates));
}

std::size_t TemplateIndex(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t h = Mix64(Mix64(seed) ^ Mix64(index + 0x632be59bd9b4e019ULL));
  // Multiply-shift onto [0, kTemplateCount).
  return static_cast<std::size_t>(
      (static_cast<unsigned __int128>(h) * kTemplateCount) >> 64);
}

std::string RenderRecord(std::string_view instruction, std::string_view input,
                         SentimentLabel label) {
  std::string out;
  out.reserve(kHumanPrefix.size() + instruction.size() + input.size() +
              kAssistantDelimiter.size() + 9);
  out.append(kHumanPrefix);
  out.append(instruction);
  out.push_back(' ');
  out.append(input);
  out.append(kAssistantDelimiter);
  out.append(LabelWord(label));
  return out;
}

InstructionRecord FormatRecord(const RawRecord& record, SentimentLabel label,
                               const std::vector<InstructionTemplate>& templates,
                               std::uint64_t seed, std::uint64_t index) {
  if (templates.size() != kTemplateCount) {
    throw Error(ErrorCode::kTemplateCountMismatch,
                "format_record needs exactly 10 templates");
  }
  InstructionRecord out;
  out.instruction = templates[TemplateIndex(seed, index)].text;
  out.input = std::string(Trim(record.text));
  out.output = label;
  out.rendered = RenderRecord(out.instruction, out.input, label);
  out.timestamp = record.timestamp;
  return out;
}

std::optional<ParsedRendering> ParseRendered(
    std::string_view rendered,
    const std::vector<InstructionTemplate>& templates) {
  if (!rendered.starts_with(kHumanPrefix)) return std::nullopt;
  auto delim = rendered.rfind(kAssistantDelimiter);
  if (delim == std::string_view::npos || delim < kHumanPrefix.size()) {
    return std::nullopt;
  }
  auto label = ParseLabelWord(rendered.substr(delim + kAssistantDelimiter.size()));
  if (!label) return std::nullopt;
  std::string_view body =
      rendered.substr(kHumanPrefix.size(), delim - kHumanPrefix.size());
  const InstructionTemplate* best = nullptr;
  for (const auto& t : templates) {
    if (body.size() > t.text.size() && body.starts_with(t.text) &&
        body[t.text.size()] == ' ' &&
        (best == nullptr || t.text.size() > best->text.size())) {
      best = &t;
    }
  }
  if (best == nullptr) return std::nullopt;
  return ParsedRendering{best->text,
                         std::string(body.substr(best->text.size() + 1)),
                         *label};
}

RawRecord ParseRawRecordLine(std::string_view line, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::exception& e) {
    throw LineError(ErrorCode::kMalformedLine, line_no, e.what());
  }
  if (!obj.is_object()) {
    throw LineError(ErrorCode::kMalformedLine, line_no, "not a JSON object");
  }
  RawRecord rec;
  auto text = obj.find("text");
  if (text == obj.end() || !text->is_string() ||
      IsBlank(text->get_ref<const std::string&>())) {
    throw LineError(ErrorCode::kMalformedLine, line_no,
                    "missing or empty \"text\"");
  }
  rec.text = text->get<std::string>();
  auto label = obj.find("label");
  if (label == obj.end()) {
    throw LineError(ErrorCode::kMalformedLine, line_no, "missing \"label\"");
  }
  if (label->is_string()) {
    rec.raw_label = label->get<std::string>();
  } else if (label->is_number_integer()) {
    rec.raw_label = label->get<std::int64_t>();
  } else {
    throw LineError(ErrorCode::kMalformedLine, line_no,
                    "\"label\" must be a string or integer");
  }
  if (auto ts = obj.find("timestamp"); ts != obj.end() && !ts->is_null()) {
    if (!ts->is_string()) {
      throw LineError(ErrorCode::kMalformedLine, line_no,
                      "\"timestamp\" must be an RFC3339 string");
    }
    rec.timestamp = ParseRfc3339(ts->get<std::string>());
    if (!rec.timestamp) {
      throw LineError(ErrorCode::kMalformedLine, line_no,
                      "bad timestamp '" + ts->get<std::string>() + "'");
    }
  }
  if (auto sid = obj.find("source_id"); sid != obj.end() && !sid->is_null()) {
    if (!sid->is_string()) {
      throw LineError(ErrorCode::kMalformedLine, line_no,
                      "\"source_id\" must be a string");
    }
    rec.source_id = sid->get<std::string>();
  }
  return rec;
}

std::string InstructionRecordToJson(const InstructionRecord& record) {
  json obj = json::object();
  obj["instruction"] = record.instruction;
  obj["input"] = record.input;
  obj["output"] = LabelWord(record.output);
  obj["rendered"] = record.rendered;
  if (record.timestamp) obj["timestamp"] = FormatRfc3339(*record.timestamp);
  return obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

InstructionRecord InstructionRecordFromJson(std::string_view line,
                                            std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::exception& e) {
    throw LineError(ErrorCode::kMalformedLine, line_no, e.what());
  }
  auto get_string = [&](const char* key) -> std::string {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
      throw LineError(ErrorCode::kMalformedLine, line_no,
                      std::string("missing string field \"") + key + "\"");
    }
    return it->get<std::string>();
  };
  if (!obj.is_object()) {
    throw LineError(ErrorCode::kMalformedLine, line_no, "not a JSON object");
  }
  InstructionRecord rec;
  rec.instruction = get_string("instruction");
  rec.input = get_string("input");
  auto label = ParseLabelWord(get_string("output"));
  if (!label) {
    throw LineError(ErrorCode::kUnknownLabel, line_no,
                    "\"output\" must be a label word");
  }
  rec.output = *label;
  rec.rendered = obj.contains("rendered")
                     ? get_string("rendered")
                     : RenderRecord(rec.instruction, rec.input, rec.output);
  if (auto ts = obj.find("timestamp"); ts != obj.end() && ts->is_string()) {
    rec.timestamp = ParseRfc3339(ts->get<std::string>());
  }
  return rec;
}

FormatSummary FormatDataset(
    std::istream& in, const std::vector<InstructionTemplate>& templates,
    const FormatOptions& options,
    const std::function<void(const InstructionRecord&)>& sink) {
  FormatSummary summary;
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t ordinal = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (IsBlank(line)) continue;
    std::uint64_t index = ordinal++;
    try {
      RawRecord raw = ParseRawRecordLine(line, line_no);
      SentimentLabel label;
      try {
        label = CanonicalizeLabel(raw.raw_label, options.scheme);
      } catch (const Error& e) {
        throw LineError(e.code(), line_no, e.what());
      }
      InstructionRecord rec =
          FormatRecord(raw, label, templates, options.seed, index);
      ++summary.per_class[static_cast<std::size_t>(label)];
      ++summary.records;
      sink(rec);
    } catch (const LineError& e) {
      if (!options.skip_bad) throw;
      ++summary.skipped;
      summary.problems.emplace_back(e.what());
    }
  }
  return summary;
}

std::vector<InstructionRecord> FormatDataset(
    std::istream& in, const std::vector<InstructionTemplate>& templates,
    const FormatOptions& options, FormatSummary* summary) {
  std::vector<InstructionRecord> out;
  auto s = FormatDataset(in, templates, options,
                         [&](const InstructionRecord& r) { out.push_back(r); });
  if (summary) *summary = std::move(s);
  return out;
}

}  // namespace finrag

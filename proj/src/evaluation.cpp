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

#include "finrag/evaluation.hpp"

#include <cstdio>

#include "finrag/error.hpp"
#include "json.hpp"

namespace finrag {

using ojson = nlohmann::ordered_json;

SentimentLabel MapOutputToLabel(std::string_view text) {
  const std::string lower = AsciiLower(text);
  if (lower.find("negative") != std::string::npos) return SentimentLabel::kNegative;
  if (lower.find("neutral") != std::string::npos) return SentimentLabel::kNeutral;
  if (lower.find("positive") != std::string::npos) return SentimentLabel::kPositive;
  return SentimentLabel::kNeutral;
}

std::string PredictionToJson(const Prediction& p) {
  ojson obj;
  obj["record_id"] = p.record_id;
  obj["raw_output"] = p.raw_output;
  obj["mapped"] = LabelWord(p.mapped);
  obj["gold"] = LabelWord(p.gold);
  obj["used_rag"] = p.used_rag;
  obj["bundle_size"] = p.bundle_size;
  obj["error"] = p.error ? ojson(*p.error) : ojson(nullptr);
  return obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void ConfusionMatrix::Add(SentimentLabel gold, SentimentLabel predicted) {
  ++counts[static_cast<std::size_t>(gold)][static_cast<std::size_t>(predicted)];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t sum = 0;
  for (const auto& row : counts) {
    for (auto c : row) sum += c;
  }
  return sum;
}

ConfusionMatrix Accumulate(std::span<const Prediction> predictions) {
  ConfusionMatrix cm;
  for (const auto& p : predictions) cm.Add(p.gold, p.mapped);
  return cm;
}

EvalReport ComputeMetrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw Error(ErrorCode::kEmptyMatrix, "confusion matrix is empty");
  EvalReport r;
  r.confusion = cm;
  r.n = total;
  std::uint64_t diag = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      row += cm.counts[k][j];
      col += cm.counts[j][k];
    }
    const double tp = static_cast<double>(cm.counts[k][k]);
    diag += cm.counts[k][k];
    r.precision[k] = col == 0 ? 0.0 : tp / static_cast<double>(col);
    r.recall[k] = row == 0 ? 0.0 : tp / static_cast<double>(row);
    const double pr = r.precision[k] + r.recall[k];
    r.f1[k] = pr == 0.0 ? 0.0 : 2.0 * r.precision[k] * r.recall[k] / pr;
    r.weighted_f1 += r.f1[k] * static_cast<double>(row);
  }
  r.accuracy = static_cast<double>(diag) / static_cast<double>(total);
  r.macro_f1 = (r.f1[0] + r.f1[1] + r.f1[2]) / 3.0;
  r.weighted_f1 /= static_cast<double>(total);
  return r;
}

namespace {

std::string RecordId(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "r%06zu", index);
  return buf;
}

}  // namespace

EvalRun RunEval(std::span<const InstructionRecord> dataset,
                CompletionBackend& backend, const CorpusStore* store,
                const EvalOptions& options) {
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "no records to evaluate");
  if (options.use_rag && store == nullptr) {
    throw Error(ErrorCode::kConfigError, "retrieval enabled without a corpus");
  }
  options.params.Validate();

  std::vector<Prediction> predictions(dataset.size());
  std::vector<PromptEnvelope> envelopes;
  std::vector<std::size_t> slots;
  envelopes.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& rec = dataset[i];
    Prediction& p = predictions[i];
    p.record_id = RecordId(i);
    p.gold = rec.output;
    std::string content = rec.input;
    if (options.use_rag) {
      Query query = PreprocessQuery(rec.input, rec.timestamp);
      if (!query.skip_retrieval()) {
        ContextBundle bundle = RetrieveContext(query, *store, options.retrieval);
        p.bundle_size = bundle.units.size();
        try {
          content = AugmentQuery(query, bundle, options.token_budget, options.counter);
        } catch (const Error& e) {
          p.error = e.what();
          continue;
        }
        p.used_rag = !bundle.empty() && content != query.raw;
      }
    }
    envelopes.push_back(PromptEnvelope::Make(rec.instruction, content));
    slots.push_back(i);
  }

  auto results =
      CompleteBatch(envelopes, backend, options.params, options.max_in_flight);
  for (std::size_t j = 0; j < results.size(); ++j) {
    Prediction& p = predictions[slots[j]];
    if (results[j].ok()) {
      p.raw_output = std::move(results[j].text);
      p.mapped = MapOutputToLabel(p.raw_output);
    } else {
      p.error = results[j].error_message;
    }
  }

  EvalRun run;
  run.report = ComputeMetrics(Accumulate(predictions));
  for (const auto& p : predictions) run.report.errors += p.error ? 1 : 0;
  run.predictions = std::move(predictions);
  return run;
}

namespace {

ojson ReportObject(const EvalReport& r) {
  ojson obj;
  obj["name"] = r.name;
  obj["n"] = r.n;
  obj["errors"] = r.errors;
  obj["accuracy"] = r.accuracy;
  obj["macro_f1"] = r.macro_f1;
  obj["weighted_f1"] = r.weighted_f1;
  ojson per_class = ojson::object();
  for (auto label : kAllLabels) {
    auto k = static_cast<std::size_t>(label);
    per_class[std::string(LabelWord(label))] = {
        {"precision", r.precision[k]}, {"recall", r.recall[k]}, {"f1", r.f1[k]}};
  }
  obj["per_class"] = std::move(per_class);
  obj["confusion"] = r.confusion.counts;
  obj["config_fingerprint"] = r.config_fingerprint;
  return obj;
}

std::string Fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

std::string ReportToJson(const EvalReport& report) {
  return ReportObject(report).dump(2) + "\n";
}

EvalReport ReportFromJson(std::string_view text) {
  try {
    auto obj = nlohmann::json::parse(text);
    EvalReport r;
    r.name = obj.value("name", "");
    r.n = obj.value("n", std::uint64_t{0});
    r.errors = obj.value("errors", std::uint64_t{0});
    r.accuracy = obj.at("accuracy").get<double>();
    r.macro_f1 = obj.at("macro_f1").get<double>();
    r.weighted_f1 = obj.value("weighted_f1", r.macro_f1);
    if (auto it = obj.find("per_class"); it != obj.end()) {
      for (auto label : kAllLabels) {
        auto k = static_cast<std::size_t>(label);
        const auto& c = it->at(std::string(LabelWord(label)));
        r.precision[k] = c.at("precision").get<double>();
        r.recall[k] = c.at("recall").get<double>();
        r.f1[k] = c.at("f1").get<double>();
      }
    }
    if (auto it = obj.find("confusion"); it != obj.end()) {
      r.confusion.counts = it->get<decltype(r.confusion.counts)>();
    }
    r.config_fingerprint = obj.value("config_fingerprint", "");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedLine, std::string("report: ") + e.what());
  }
}

std::string RenderReport(std::span<const EvalReport> reports, ReportFormat format) {
  if (format == ReportFormat::kJson) {
    ojson arr = ojson::array();
    for (const auto& r : reports) arr.push_back(ReportObject(r));
    return arr.dump(2) + "\n";
  }
  std::string out =
      "| Configuration | Acc | F1 (macro) | F1 (weighted) | n | errors | config |\n"
      "|---|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    out += "| " + r.name + " | " + Fixed3(r.accuracy) + " | " +
           Fixed3(r.macro_f1) + " | " + Fixed3(r.weighted_f1) + " | " +
           std::to_string(r.n) + " | " + std::to_string(r.errors) + " | " +
           r.config_fingerprint.substr(0, 12) + " |\n";
  }
  return out;
}

}  // namespace finrag

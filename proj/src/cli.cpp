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

#include "finrag/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "finrag/backend.hpp"
#include "finrag/bpe.hpp"
#include "finrag/corpus_store.hpp"
#include "finrag/dataset_formatter.hpp"
#include "finrag/evaluation.hpp"
#include "finrag/retrieval.hpp"
#include "finrag/toy_lm.hpp"
#include "finrag/util.hpp"
#include "json.hpp"

namespace finrag {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::string_view kDefaultConfig = R"({
  "seed": 0,
  "out_dir": ".",
  "verbose": false,
  "data": {
    "input": "",
    "formatted": "",
    "label_scheme": "canonical",
    "templates": "",
    "skip_bad": false
  },
  "tokenizer": {"vocab_size": 512},
  "train": {
    "profile": "toy",
    "epochs": null,
    "batch_size": null,
    "lr": null,
    "weight_decay": null,
    "max_seq_len": null,
    "embed_dim": 32,
    "window": 8,
    "init_std": 0.02
  },
  "corpus": {"store": "", "source": "", "source_kind": ""},
  "retrieval": {
    "doc_threshold": 0.8,
    "unit_threshold": 0.7,
    "use_timestamp_window": true,
    "window_before_hours": 72,
    "window_after_hours": 24,
    "phrase_ngram": 0,
    "token_budget": 512
  },
  "backend": {
    "kind": "mock",
    "endpoint": "",
    "model_name": "",
    "credential_env": "",
    "response_pointer": "/choices/0/message/content",
    "rate_limit_per_sec": 0.0,
    "rate_burst": 1.0,
    "checkpoint": "",
    "vocab": "",
    "cue_table": ""
  },
  "completion": {
    "temperature": 0.0,
    "max_tokens": 8,
    "timeout_ms": 30000,
    "max_retries": 3,
    "initial_backoff_ms": 200,
    "max_backoff_ms": 5000
  },
  "eval": {"rag": "both", "max_in_flight": 4, "max_error_fraction": 0.1},
  "predict": {"rag": "off"}
})";

[[noreturn]] void ConfigFail(const std::string& message) {
  throw Error(ErrorCode::kConfigError, message);
}

void Merge(json& base, const json& overlay, const std::string& where) {
  if (!overlay.is_object()) ConfigFail(where + ": expected an object");
  for (const auto& [key, value] : overlay.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    auto it = base.find(key);
    if (it == base.end()) ConfigFail("unknown config key '" + path + "'");
    json& slot = *it;
    if (slot.is_object()) {
      Merge(slot, value, path);
      continue;
    }
    bool ok = false;
    if (slot.is_null()) {
      ok = value.is_null() || value.is_number();
    } else if (slot.is_number_integer()) {
      ok = value.is_number_integer() && value.get<std::int64_t>() >= 0;
    } else if (slot.is_number()) {
      ok = value.is_number();
    } else if (slot.is_boolean()) {
      ok = value.is_boolean();
    } else if (slot.is_string()) {
      ok = value.is_string();
    }
    if (!ok) {
      ConfigFail("config key '" + path + "' expects a " + slot.type_name() +
                 ", got " + value.dump());
    }
    slot = value;
  }
}

json ParseJsonOrFail(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    ConfigFail(what + ": " + e.what());
  }
}

// Converts a flag value to the JSON type of the default at `pointer`.
json FlagValue(const json& defaults, const std::string& pointer,
               const std::string& value) {
  const json& slot = defaults.at(json::json_pointer(pointer));
  if (slot.is_string()) return value;
  if (slot.is_boolean()) {
    std::string v = AsciiLower(value);
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    ConfigFail("expected a boolean for " + pointer + ", got '" + value + "'");
  }
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_number()) {
    ConfigFail("expected a number for " + pointer + ", got '" + value + "'");
  }
  return parsed;
}

// Applies one flag value with the same checks as a config file.
void SetPointer(json& tree, const std::string& pointer, const json& value) {
  json overlay;
  overlay[json::json_pointer(pointer)] = value;
  Merge(tree, overlay, "");
}

// --- Per-run context --------------------------------------------------------

struct Context {
  json cfg;
  std::string fingerprint;
  fs::path out_dir;
  bool verbose = false;
  std::ostream* out;
  std::ostream* err;

  std::ostream& Out() { return *out; }
  std::ostream& Err() { return *err; }
  void Log(const std::string& line) {
    if (verbose) Err() << line << "\n";
  }
  const json& At(const std::string& pointer) const {
    return cfg.at(json::json_pointer(pointer));
  }
  std::string Str(const std::string& pointer) const {
    return At(pointer).get<std::string>();
  }
  double Num(const std::string& pointer) const { return At(pointer).get<double>(); }
  std::size_t Size(const std::string& pointer) const {
    return At(pointer).get<std::size_t>();
  }
  // Configured path, or `fallback` inside out_dir when unset.
  fs::path PathOr(const std::string& pointer, std::string_view fallback) const {
    std::string v = Str(pointer);
    return v.empty() ? out_dir / fallback : fs::path(v);
  }
  void EnsureOutDir() const {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
      throw Error(ErrorCode::kStorageFailure,
                  "cannot create " + out_dir.string() + ": " + ec.message());
    }
  }
  // Sidecar recording the resolved config next to a command's outputs.
  void WriteRunConfig(std::string_view command) const {
    nlohmann::ordered_json doc;
    doc["command"] = command;
    doc["config_fingerprint"] = fingerprint;
    json stable = cfg;
    stable.erase("out_dir");
    stable.erase("verbose");
    doc["config"] = stable;
    WriteFile((out_dir / (std::string(command) + ".config.json")).string(),
              doc.dump(2) + "\n");
  }
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void RequireFile(const fs::path& path, std::string_view what) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw UsageError(std::string(what) + " '" + path.string() + "' not found");
  }
}

std::vector<InstructionRecord> ReadInstructionRecords(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kStorageFailure, "cannot open " + path.string());
  }
  std::vector<InstructionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (IsBlank(line)) continue;
    records.push_back(InstructionRecordFromJson(line, line_no));
  }
  return records;
}

std::optional<UtcTime> ParseAt(const std::string& at) {
  if (at.empty()) return std::nullopt;
  auto t = ParseRfc3339(at);
  if (!t) throw UsageError("--at expects an RFC 3339 timestamp, got '" + at + "'");
  return t;
}

RetrievalOptions RetrievalFromConfig(const Context& ctx) {
  RetrievalOptions opt;
  opt.doc_threshold = ctx.Num("/retrieval/doc_threshold");
  opt.unit_threshold = ctx.Num("/retrieval/unit_threshold");
  opt.range_from_timestamp = ctx.At("/retrieval/use_timestamp_window").get<bool>();
  opt.window_before = std::chrono::hours(ctx.Size("/retrieval/window_before_hours"));
  opt.window_after = std::chrono::hours(ctx.Size("/retrieval/window_after_hours"));
  opt.phrase_ngram = ctx.Size("/retrieval/phrase_ngram");
  return opt;
}

CompletionParams CompletionFromConfig(const Context& ctx) {
  CompletionParams p;
  p.temperature = ctx.Num("/completion/temperature");
  p.max_tokens = ctx.Size("/completion/max_tokens");
  p.timeout = std::chrono::milliseconds(ctx.Size("/completion/timeout_ms"));
  p.max_retries = ctx.Size("/completion/max_retries");
  p.initial_backoff =
      std::chrono::milliseconds(ctx.Size("/completion/initial_backoff_ms"));
  p.max_backoff = std::chrono::milliseconds(ctx.Size("/completion/max_backoff_ms"));
  p.Validate();
  return p;
}

std::unique_ptr<CompletionBackend> BackendFromConfig(const Context& ctx) {
  BackendConfig bc;
  auto kind = ParseBackendKind(ctx.Str("/backend/kind"));
  if (!kind) ConfigFail("unknown backend kind '" + ctx.Str("/backend/kind") + "'");
  bc.kind = *kind;
  bc.http.endpoint = ctx.Str("/backend/endpoint");
  bc.http.model_name = ctx.Str("/backend/model_name");
  bc.http.credential_env = ctx.Str("/backend/credential_env");
  bc.http.response_pointer = ctx.Str("/backend/response_pointer");
  bc.http.rate_limit_per_sec = ctx.Num("/backend/rate_limit_per_sec");
  bc.http.rate_burst = ctx.Num("/backend/rate_burst");
  bc.checkpoint_path = ctx.PathOr("/backend/checkpoint", "checkpoint.json").string();
  bc.vocab_path = ctx.PathOr("/backend/vocab", "vocab.json").string();
  bc.cue_table_path = ctx.Str("/backend/cue_table");
  if (bc.kind == BackendKind::kToy) {
    RequireFile(bc.checkpoint_path, "checkpoint");
    RequireFile(bc.vocab_path, "vocabulary");
  }
  return MakeBackend(bc);
}

// --- Commands ----------------------------------------------------------------

int CmdFormat(Context& ctx) {
  const std::string input = ctx.Str("/data/input");
  if (input.empty()) throw UsageError("format needs --input");
  RequireFile(input, "dataset");
  auto scheme = ParseLabelScheme(ctx.Str("/data/label_scheme"));
  if (!scheme) ConfigFail("unknown label scheme '" + ctx.Str("/data/label_scheme") + "'");
  std::optional<std::string> template_path;
  if (auto t = ctx.Str("/data/templates"); !t.empty()) template_path = t;
  auto templates = LoadTemplates(template_path);

  FormatOptions options;
  options.scheme = *scheme;
  options.seed = ctx.At("/seed").get<std::uint64_t>();
  options.skip_bad = ctx.At("/data/skip_bad").get<bool>();

  std::ifstream in(input);
  std::string formatted;
  FormatSummary summary;
  try {
    summary = FormatDataset(in, templates, options,
                            [&](const InstructionRecord& rec) {
                              formatted += InstructionRecordToJson(rec);
                              formatted.push_back('\n');
                            });
  } catch (const LineError& e) {
    ctx.Err() << "error: " << input << ":" << e.line_no() << ": " << e.what()
              << "\n";
    return kExitDataError;
  }
  for (const auto& problem : summary.problems) {
    ctx.Err() << "warning: skipped " << problem << "\n";
  }
  ctx.EnsureOutDir();
  const fs::path output = ctx.PathOr("/data/formatted", "formatted.jsonl");
  WriteFile(output.string(), formatted);
  ctx.WriteRunConfig("format");
  ctx.Out() << summary.records << " records written to " << output.string()
            << " (negative " << summary.per_class[0] << ", neutral "
            << summary.per_class[1] << ", positive " << summary.per_class[2]
            << "), " << summary.skipped << " skipped\n";
  return kExitOk;
}

TrainConfig TrainFromConfig(const Context& ctx) {
  TrainConfig tc = TrainConfig::Profile(ctx.Str("/train/profile"));
  auto size_or = [&](const char* p, std::size_t& dst) {
    if (!ctx.At(p).is_null()) dst = ctx.Size(p);
  };
  auto num_or = [&](const char* p, double& dst) {
    if (!ctx.At(p).is_null()) dst = ctx.Num(p);
  };
  size_or("/train/epochs", tc.epochs);
  size_or("/train/batch_size", tc.batch_size);
  size_or("/train/max_seq_len", tc.max_seq_len);
  num_or("/train/lr", tc.lr);
  num_or("/train/weight_decay", tc.weight_decay);
  tc.seed = ctx.At("/seed").get<std::uint64_t>();
  tc.Validate();
  return tc;
}

int CmdTrain(Context& ctx) {
  const fs::path data = ctx.PathOr("/data/formatted", "formatted.jsonl");
  RequireFile(data, "formatted dataset");
  auto records = ReadInstructionRecords(data);
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) texts.push_back(r.rendered);

  TrainConfig tc = TrainFromConfig(ctx);
  ModelConfig mc;
  mc.embed_dim = ctx.Size("/train/embed_dim");
  mc.window = ctx.Size("/train/window");
  mc.init_std = ctx.Num("/train/init_std");

  Vocab vocab = TrainBpe(texts, ctx.Size("/tokenizer/vocab_size"));
  ctx.Log("tokenizer: " + std::to_string(vocab.size()) + " tokens");
  TrainResult result = Train(texts, vocab, tc, mc, [&](std::size_t epoch, double loss) {
    ctx.Log("epoch " + std::to_string(epoch) + ": mean nll " + std::to_string(loss));
  });

  ctx.EnsureOutDir();
  const fs::path vocab_path = ctx.PathOr("/backend/vocab", "vocab.json");
  const fs::path ckpt_path = ctx.PathOr("/backend/checkpoint", "checkpoint.json");
  WriteFile(vocab_path.string(), vocab.ToJson());
  SaveCheckpoint(ckpt_path.string(), {result.params, vocab.Hash(), tc});
  WriteFile((ctx.out_dir / "loss.csv").string(),
            LossCurveCsv(result.initial_loss, result.loss_curve));
  ctx.WriteRunConfig("train");
  char line[160];
  std::snprintf(line, sizeof(line), "trained %zu epochs on %zu records: loss %.6f -> %.6f\n",
                result.loss_curve.size(), records.size(), result.initial_loss,
                result.loss_curve.empty() ? result.initial_loss
                                          : result.loss_curve.back());
  ctx.Out() << line;
  return kExitOk;
}

int CmdIngest(Context& ctx) {
  const std::string source = ctx.Str("/corpus/source");
  if (source.empty()) throw UsageError("ingest needs --source");
  std::optional<SourceKind> kind;
  if (auto k = ctx.Str("/corpus/source_kind"); !k.empty()) {
    kind = ParseSourceKind(k);
    if (!kind) ConfigFail("unknown source kind '" + k + "'");
  }
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(source, ec)) {
    for (const auto& entry : fs::directory_iterator(source)) {
      auto ext = entry.path().extension();
      if (entry.is_regular_file() && (ext == ".jsonl" || ext == ".txt")) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
  } else {
    RequireFile(source, "source");
    files.emplace_back(source);
  }

  ctx.EnsureOutDir();
  CorpusStore store(ctx.PathOr("/corpus/store", "corpus"));
  std::size_t inserted = 0, duplicates = 0;
  std::vector<std::string> problems;
  auto ingest = [&](KnowledgeDoc doc) {
    if (kind) doc.source_kind = *kind;
    (store.Ingest(std::move(doc)).inserted ? inserted : duplicates) += 1;
  };
  for (const auto& path : files) {
    if (path.extension() == ".txt") {
      std::string text = ReadFile(path.string());
      auto nl = text.find('\n');
      KnowledgeDoc doc;
      doc.title = std::string(Trim(std::string_view(text).substr(0, nl)));
      doc.body = nl == std::string::npos ? "" : text.substr(nl + 1);
      try {
        ingest(std::move(doc));
      } catch (const Error& e) {
        problems.push_back(path.string() + ": " + e.what());
      }
      continue;
    }
    std::ifstream in(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (IsBlank(line)) continue;
      try {
        ingest(ParseCorpusLine(line, line_no));
      } catch (const Error& e) {
        problems.push_back(path.string() + ":" + std::to_string(line_no) + ": " +
                           e.what());
      }
    }
  }
  ctx.Out() << inserted << " ingested, " << duplicates << " duplicates\n";
  if (!problems.empty()) {
    ctx.Err() << problems.size() << " errors:\n";
    for (const auto& p : problems) ctx.Err() << "  " << p << "\n";
    return kExitDataError;
  }
  return kExitOk;
}

int CmdRetrieve(Context& ctx, const std::string& text, const std::string& at,
                const std::string& trace_out) {
  if (text.empty()) throw UsageError("retrieve needs --query");
  Query query = PreprocessQuery(text, ParseAt(at));
  if (query.skip_retrieval()) {
    ctx.Out() << "retrieval skipped: query has no tokens after preprocessing\n";
    return kExitOk;
  }
  CorpusStore store(ctx.PathOr("/corpus/store", "corpus"));
  RetrievalTrace trace;
  ContextBundle bundle = RetrieveContext(query, store, RetrievalFromConfig(ctx), &trace);
  if (bundle.empty()) {
    ctx.Out() << "(empty bundle)\n";
  } else {
    ctx.Out() << bundle.concatenated << "\n";
  }
  std::string trace_line = TraceToJson(trace);
  ctx.Out() << trace_line << "\n";
  if (!trace_out.empty()) {
    std::ofstream f(trace_out, std::ios::app | std::ios::binary);
    if (!f) throw Error(ErrorCode::kStorageFailure, "cannot open " + trace_out);
    f << trace_line << "\n";
  }
  return kExitOk;
}

bool RagFlag(const std::string& value, bool allow_both) {
  if (value == "on") return true;
  if (value == "off") return false;
  if (allow_both && value == "both") return true;
  ConfigFail("rag must be on or off" + std::string(allow_both ? " or both" : "") +
             ", got '" + value + "'");
}

int CmdPredict(Context& ctx, const std::string& text, const std::string& at) {
  if (text.empty()) throw UsageError("predict needs --text");
  const bool rag = RagFlag(ctx.Str("/predict/rag"), false);
  auto backend = BackendFromConfig(ctx);
  CompletionParams params = CompletionFromConfig(ctx);

  std::string content = text;
  std::size_t bundle_size = 0;
  bool used_rag = false;
  Query query = PreprocessQuery(text, ParseAt(at));
  if (rag && !query.skip_retrieval()) {
    CorpusStore store(ctx.PathOr("/corpus/store", "corpus"));
    ContextBundle bundle = RetrieveContext(query, store, RetrievalFromConfig(ctx));
    bundle_size = bundle.units.size();
    content = AugmentQuery(query, bundle, ctx.Size("/retrieval/token_budget"),
                           WordCounter());
    used_rag = content != query.raw;
  }
  auto templates = LoadTemplates(ctx.Str("/data/templates").empty()
                                     ? std::nullopt
                                     : std::optional(ctx.Str("/data/templates")));
  const auto& instruction =
      templates[TemplateIndex(ctx.At("/seed").get<std::uint64_t>(), 0)].text;
  std::string output =
      backend->Complete(PromptEnvelope::Make(instruction, content), params);
  nlohmann::ordered_json obj;
  obj["input"] = text;
  obj["content"] = content;
  obj["raw_output"] = output;
  obj["mapped"] = LabelWord(MapOutputToLabel(output));
  obj["used_rag"] = used_rag;
  obj["bundle_size"] = bundle_size;
  ctx.Out() << obj.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << "\n";
  return kExitOk;
}

int CmdEval(Context& ctx) {
  const std::string mode = ctx.Str("/eval/rag");
  RagFlag(mode, true);
  const fs::path data = ctx.PathOr("/data/formatted", "formatted.jsonl");
  RequireFile(data, "formatted dataset");
  auto backend = BackendFromConfig(ctx);
  auto records = ReadInstructionRecords(data);

  EvalOptions options;
  options.retrieval = RetrievalFromConfig(ctx);
  options.token_budget = ctx.Size("/retrieval/token_budget");
  options.params = CompletionFromConfig(ctx);
  options.max_in_flight = ctx.Size("/eval/max_in_flight");

  std::vector<bool> modes;
  if (mode == "off" || mode == "both") modes.push_back(false);
  if (mode == "on" || mode == "both") modes.push_back(true);

  std::unique_ptr<CorpusStore> store;
  ctx.EnsureOutDir();
  std::vector<EvalReport> reports;
  bool too_many_errors = false;
  const double max_error_fraction = ctx.Num("/eval/max_error_fraction");
  for (bool rag : modes) {
    if (rag && !store) {
      store = std::make_unique<CorpusStore>(ctx.PathOr("/corpus/store", "corpus"));
    }
    options.use_rag = rag;
    EvalRun run = RunEval(records, *backend, store.get(), options);
    run.report.name = backend->name() + (rag ? " w/ RAG" : " w/o RAG");
    run.report.config_fingerprint = ctx.fingerprint;
    const std::string suffix = rag ? "rag_on" : "rag_off";
    std::string jsonl;
    for (const auto& p : run.predictions) jsonl += PredictionToJson(p) + "\n";
    WriteFile((ctx.out_dir / ("predictions_" + suffix + ".jsonl")).string(), jsonl);
    WriteFile((ctx.out_dir / ("report_" + suffix + ".json")).string(),
              ReportToJson(run.report));
    if (run.report.errors > 0) {
      ctx.Err() << "warning: " << run.report.errors << " of " << run.report.n
                << " records failed (" << run.report.name << ")\n";
    }
    if (static_cast<double>(run.report.errors) >
        max_error_fraction * static_cast<double>(run.report.n)) {
      too_many_errors = true;
    }
    reports.push_back(std::move(run.report));
  }
  std::string markdown = RenderReport(reports, ReportFormat::kMarkdown);
  WriteFile((ctx.out_dir / "report.md").string(), markdown);
  WriteFile((ctx.out_dir / "report.json").string(),
            RenderReport(reports, ReportFormat::kJson));
  ctx.WriteRunConfig("eval");
  ctx.Out() << markdown;
  if (too_many_errors) {
    ctx.Err() << "error: backend failures exceed eval.max_error_fraction\n";
    return kExitBackend;
  }
  return kExitOk;
}

int CmdReport(Context& ctx, const std::vector<std::string>& inputs,
              const std::string& format, const std::string& output) {
  if (inputs.empty()) throw UsageError("report needs at least one report file");
  ReportFormat fmt;
  if (format == "markdown" || format == "md") {
    fmt = ReportFormat::kMarkdown;
  } else if (format == "json") {
    fmt = ReportFormat::kJson;
  } else {
    throw UsageError("--format must be markdown or json");
  }
  std::vector<EvalReport> reports;
  for (const auto& path : inputs) {
    RequireFile(path, "report");
    json doc = json::parse(ReadFile(path), nullptr, false);
    if (doc.is_array()) {
      for (const auto& item : doc) reports.push_back(ReportFromJson(item.dump()));
    } else {
      reports.push_back(ReportFromJson(ReadFile(path)));
    }
  }
  std::string rendered = RenderReport(reports, fmt);
  if (output.empty()) {
    ctx.Out() << rendered;
  } else {
    WriteFile(output, rendered);
  }
  return kExitOk;
}

// Flag bound to a config key.
struct Binding {
  CLI::Option* option;
  std::string pointer;
  std::shared_ptr<std::string> value;
};

struct Bindings {
  std::vector<Binding> list;

  void Add(CLI::App* app, const std::string& flag, const std::string& pointer,
           const std::string& help) {
    auto value = std::make_shared<std::string>();
    list.push_back({app->add_option(flag, *value, help), pointer, value});
  }
  void AddFlag(CLI::App* app, const std::string& flag, const std::string& pointer,
               const std::string& help) {
    auto value = std::make_shared<std::string>();
    auto* opt = app->add_flag_callback(flag, [value] { *value = "true"; }, help);
    list.push_back({opt, pointer, value});
  }
};

}  // namespace

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kAuthFailure:
    case ErrorCode::kStorageFailure:
    case ErrorCode::kBudgetTooSmall:
      return kExitUsage;
    case ErrorCode::kNetworkFailure:
    case ErrorCode::kTimeout:
    case ErrorCode::kRateLimited:
    case ErrorCode::kBackendUnavailable:
    case ErrorCode::kMalformedResponse:
      return kExitBackend;
    default:
      return kExitDataError;
  }
}

std::string DefaultConfigJson() { return json::parse(kDefaultConfig).dump(2); }

std::string MergeConfigJson(std::string_view base, std::string_view overlay) {
  json tree = ParseJsonOrFail(base, "config");
  Merge(tree, ParseJsonOrFail(overlay, "config"), "");
  return tree.dump(2);
}

std::string ConfigFingerprint(std::string_view resolved) {
  json tree = ParseJsonOrFail(resolved, "config");
  tree.erase("out_dir");
  tree.erase("verbose");
  return Sha256Hex(tree.dump());
}

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Retrieval-augmented financial sentiment pipeline", "finrag"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string seed, out_dir;
  bool verbose = false;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "JSON config file");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random choice");
  auto* out_opt = app.add_option("--out-dir", out_dir, "Directory for outputs");
  app.add_flag("-v,--verbose", verbose, "Progress messages on stderr");
  app.add_option("--set", sets, "Override a config key: section.key=value");

  Bindings b;
  auto* format = app.add_subcommand("format", "Convert a labeled dataset to instruction records");
  b.Add(format, "--input", "/data/input", "Raw JSONL dataset");
  b.Add(format, "--output", "/data/formatted", "Formatted JSONL (default <out-dir>/formatted.jsonl)");
  b.Add(format, "--scheme", "/data/label_scheme", "twitter | fiqa | fpb | canonical");
  b.Add(format, "--templates", "/data/templates", "JSON file with 10 instruction templates");
  b.AddFlag(format, "--skip-bad", "/data/skip_bad", "Skip malformed lines with a warning");

  auto* train = app.add_subcommand("train", "Train the tokenizer and toy model");
  b.Add(train, "--data", "/data/formatted", "Formatted JSONL");
  b.Add(train, "--profile", "/train/profile", "toy | full");
  b.Add(train, "--epochs", "/train/epochs", "Epochs");
  b.Add(train, "--batch-size", "/train/batch_size", "Sequences per update");
  b.Add(train, "--lr", "/train/lr", "Learning rate");
  b.Add(train, "--weight-decay", "/train/weight_decay", "Decoupled weight decay");
  b.Add(train, "--vocab-size", "/tokenizer/vocab_size", "Tokenizer size including 256 bytes");

  auto* ingest = app.add_subcommand("ingest", "Add documents to the corpus store");
  b.Add(ingest, "--source", "/corpus/source", "Directory or JSONL file");
  b.Add(ingest, "--store", "/corpus/store", "Store directory (default <out-dir>/corpus)");
  b.Add(ingest, "--kind", "/corpus/source_kind", "Override the documents' source kind");

  std::string query, at, trace_out, text;
  auto* retrieve = app.add_subcommand("retrieve", "Show the context retrieved for a query");
  retrieve->add_option("--query", query, "Headline or tweet");
  retrieve->add_option("--at", at, "Query timestamp (RFC 3339)");
  retrieve->add_option("--trace-out", trace_out, "Append the trace to this JSONL file");
  b.Add(retrieve, "--store", "/corpus/store", "Store directory");
  b.Add(retrieve, "--doc-threshold", "/retrieval/doc_threshold", "Document overlap threshold");
  b.Add(retrieve, "--unit-threshold", "/retrieval/unit_threshold", "Unit overlap threshold");

  auto* predict = app.add_subcommand("predict", "Classify one text");
  predict->add_option("--text", text, "Text to classify");
  predict->add_option("--at", at, "Timestamp for retrieval (RFC 3339)");
  b.Add(predict, "--rag", "/predict/rag", "on | off");
  b.Add(predict, "--backend", "/backend/kind", "mock | toy | http");
  b.Add(predict, "--store", "/corpus/store", "Store directory");

  auto* eval = app.add_subcommand("eval", "Evaluate a formatted dataset");
  b.Add(eval, "--data", "/data/formatted", "Formatted JSONL");
  b.Add(eval, "--rag", "/eval/rag", "on | off | both");
  b.Add(eval, "--backend", "/backend/kind", "mock | toy | http");
  b.Add(eval, "--store", "/corpus/store", "Store directory");
  b.Add(eval, "--max-in-flight", "/eval/max_in_flight", "Concurrent backend requests");

  std::vector<std::string> report_inputs;
  std::string report_format = "markdown", report_output;
  auto* report = app.add_subcommand("report", "Render saved reports as one table");
  report->add_option("inputs", report_inputs, "Report JSON files");
  report->add_option("--format", report_format, "markdown | json");
  report->add_option("--output", report_output, "Write here instead of stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    json defaults = json::parse(kDefaultConfig);
    json tree = defaults;
    if (!config_path.empty()) {
      RequireFile(config_path, "config");
      Merge(tree, ParseJsonOrFail(ReadFile(config_path), config_path), "");
    }
    for (const auto& s : sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value");
      std::string pointer = "/" + s.substr(0, eq);
      std::replace(pointer.begin(), pointer.end(), '.', '/');
      if (!defaults.contains(json::json_pointer(pointer))) {
        ConfigFail("unknown config key '" + s.substr(0, eq) + "'");
      }
      SetPointer(tree, pointer, FlagValue(defaults, pointer, s.substr(eq + 1)));
    }
    if (seed_opt->count() > 0) SetPointer(tree, "/seed", FlagValue(defaults, "/seed", seed));
    if (out_opt->count() > 0) tree["out_dir"] = out_dir;
    if (verbose) tree["verbose"] = true;
    for (const auto& binding : b.list) {
      if (binding.option->count() == 0) continue;
      SetPointer(tree, binding.pointer,
                 FlagValue(defaults, binding.pointer, *binding.value));
    }

    Context ctx;
    ctx.cfg = tree;
    ctx.fingerprint = ConfigFingerprint(tree.dump());
    ctx.out_dir = tree["out_dir"].get<std::string>();
    ctx.verbose = tree["verbose"].get<bool>();
    ctx.out = &out;
    ctx.err = &err;
    ctx.Log("config " + ctx.fingerprint);

    if (*format) return CmdFormat(ctx);
    if (*train) return CmdTrain(ctx);
    if (*ingest) return CmdIngest(ctx);
    if (*retrieve) return CmdRetrieve(ctx, query, at, trace_out);
    if (*predict) return CmdPredict(ctx, text, at);
    if (*eval) return CmdEval(ctx);
    if (*report) return CmdReport(ctx, report_inputs, report_format, report_output);
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << "run 'finrag --help' for usage\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  }
}

}  // namespace finrag

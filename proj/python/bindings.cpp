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


#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "finrag/backend.hpp"
#include "finrag/bpe.hpp"
#include "finrag/cli.hpp"
#include "finrag/corpus_store.hpp"
#include "finrag/dataset_formatter.hpp"
#include "finrag/evaluation.hpp"
#include "finrag/retrieval.hpp"
#include "finrag/toy_lm.hpp"

namespace py = pybind11;

namespace finrag {
namespace {

std::optional<UtcTime> TimeArg(const std::optional<std::string>& text) {
  if (!text) return std::nullopt;
  auto t = ParseRfc3339(*text);
  if (!t) throw Error(ErrorCode::kInvalidArgument, "bad timestamp '" + *text + "'");
  return t;
}

py::dict RecordDict(const InstructionRecord& r) {
  py::dict d;
  d["instruction"] = r.instruction;
  d["input"] = r.input;
  d["output"] = std::string(LabelWord(r.output));
  d["rendered"] = r.rendered;
  d["timestamp"] = r.timestamp ? py::cast(FormatRfc3339(*r.timestamp)) : py::none();
  return d;
}

py::dict ReportDict(const EvalReport& r) {
  py::dict d;
  d["name"] = r.name;
  d["accuracy"] = r.accuracy;
  d["precision"] = r.precision;
  d["recall"] = r.recall;
  d["f1"] = r.f1;
  d["macro_f1"] = r.macro_f1;
  d["weighted_f1"] = r.weighted_f1;
  d["n"] = r.n;
  d["errors"] = r.errors;
  d["confusion"] = r.confusion.counts;
  return d;
}

}  // namespace
}  // namespace finrag

PYBIND11_MODULE(_core, m) {
  using namespace finrag;
  m.doc() = "Retrieval-augmented financial sentiment pipeline";

  // FinragError(message) with a `code` attribute naming the error code.
  static py::handle error_type =
      py::exception<Error>(m, "FinragError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = std::string(ErrorCodeName(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  // Dataset formatting.
  m.def(
      "format_dataset",
      [](const std::string& jsonl, const std::string& scheme, std::uint64_t seed,
         bool skip_bad) {
        auto parsed = ParseLabelScheme(scheme);
        if (!parsed) throw Error(ErrorCode::kConfigError, "unknown scheme '" + scheme + "'");
        std::istringstream in(jsonl);
        FormatOptions opts{*parsed, seed, skip_bad};
        py::list out;
        for (const auto& r : FormatDataset(in, DefaultTemplates(), opts)) out.append(RecordDict(r));
        return out;
      },
      py::arg("jsonl"), py::arg("scheme") = "canonical", py::arg("seed") = 0,
      py::arg("skip_bad") = false, "Raw JSONL text to instruction records.");
  m.def("template_index", &TemplateIndex, py::arg("seed"), py::arg("index"));

  // Tokenizer.
  py::class_<Vocab>(m, "Vocab")
      .def(py::init<>())
      .def_property_readonly("size", &Vocab::size)
      .def("encode", [](const Vocab& v, const std::string& s) { return v.Encode(s); })
      .def("decode",
           [](const Vocab& v, const std::vector<TokenId>& ids) {
             return py::bytes(v.Decode(ids));
           })
      .def("merges", &Vocab::MergePairs)
      .def("to_json", &Vocab::ToJson)
      .def_static("from_json", [](const std::string& s) { return Vocab::FromJson(s); })
      .def("hash", &Vocab::Hash);
  m.def(
      "train_bpe",
      [](const std::vector<std::string>& corpus, std::size_t vocab_size) {
        return TrainBpe(corpus, vocab_size);
      },
      py::arg("corpus"), py::arg("vocab_size"));

  // Toy model.
  m.def(
      "train_toy_model",
      [](const std::vector<std::string>& texts, const Vocab& vocab, std::size_t epochs,
         std::uint64_t seed) {
        TrainConfig config = TrainConfig::Toy();
        config.epochs = epochs;
        config.seed = seed;
        std::optional<TrainResult> trained;
        {
          py::gil_scoped_release release;
          trained = Train(texts, vocab, config);
        }
        const TrainResult& result = *trained;
        py::dict d;
        d["initial_loss"] = result.initial_loss;
        d["loss_curve"] = result.loss_curve;
        d["checkpoint"] = CheckpointToJson({result.params, vocab.Hash(), config});
        return d;
      },
      py::arg("texts"), py::arg("vocab"), py::arg("epochs") = 10, py::arg("seed") = 0,
      "Trains the toy model; returns the loss curve and a checkpoint JSON string.");
  m.def(
      "clm_nll",
      [](const std::string& checkpoint_json, const std::vector<TokenId>& seq) {
        return ClmNll(CheckpointFromJson(checkpoint_json).params, seq);
      },
      py::arg("checkpoint_json"), py::arg("tokens"));

  // Retrieval.
  m.def("clean_text", &CleanText, py::arg("text"));
  m.def(
      "lexical_tokens",
      [](const std::string& text) {
        auto t = CleanTokens(text);
        return std::vector<std::string>(t.begin(), t.end());
      },
      py::arg("text"));
  m.def(
      "overlap",
      [](const std::vector<std::string>& x, const std::vector<std::string>& y) {
        return Overlap(TokenSet(x.begin(), x.end()), TokenSet(y.begin(), y.end()));
      },
      py::arg("x"), py::arg("y"));

  py::class_<CorpusStore>(m, "CorpusStore")
      .def(py::init<>())
      .def(py::init([](const std::string& dir) { return new CorpusStore(dir); }),
           py::arg("directory"))
      .def_property_readonly("size", &CorpusStore::size)
      .def(
          "ingest",
          [](CorpusStore& store, const std::string& title, const std::string& body,
             const std::string& source_kind, const std::optional<std::string>& published_at,
             const std::optional<std::string>& url) {
            KnowledgeDoc doc;
            doc.title = title;
            doc.body = body;
            auto kind = ParseSourceKind(source_kind);
            if (!kind) throw Error(ErrorCode::kInvalidArgument, "unknown source kind");
            doc.source_kind = *kind;
            doc.published_at = TimeArg(published_at);
            doc.url = url;
            auto r = store.Ingest(std::move(doc));
            return py::make_tuple(r.id, r.inserted);
          },
          py::arg("title"), py::arg("body") = "", py::arg("source_kind") = "news",
          py::arg("published_at") = py::none(), py::arg("url") = py::none(),
          "Returns (id, inserted).")
      .def(
          "ingest_jsonl",
          [](CorpusStore& store, const std::string& jsonl) {
            std::istringstream in(jsonl);
            std::string line;
            std::size_t no = 0, inserted = 0;
            while (std::getline(in, line)) {
              ++no;
              if (IsBlank(line)) continue;
              inserted += store.Ingest(ParseCorpusLine(line, no)).inserted ? 1 : 0;
            }
            return inserted;
          },
          py::arg("jsonl"))
      .def(
          "retrieve",
          [](const CorpusStore& store, const std::string& query,
             const std::optional<std::string>& at, double doc_threshold,
             double unit_threshold) {
            RetrievalOptions opts;
            opts.doc_threshold = doc_threshold;
            opts.unit_threshold = unit_threshold;
            Query q = PreprocessQuery(query, TimeArg(at));
            if (q.skip_retrieval()) return py::dict();
            RetrievalTrace trace;
            auto bundle = RetrieveContext(q, store, opts, &trace);
            py::list units;
            for (const auto& u : bundle.units) {
              py::dict d;
              d["text"] = u.text;
              d["doc_id"] = u.parent_doc_id;
              d["unit_index"] = u.unit_index;
              d["score"] = u.unit_score;
              units.append(d);
            }
            py::dict d;
            d["units"] = units;
            d["doc_scores"] = bundle.doc_scores;
            d["context"] = bundle.concatenated;
            d["prompt"] = AugmentQuery(q, bundle, 512, WordCounter());
            d["trace"] = TraceToJson(trace);
            return d;
          },
          py::arg("query"), py::arg("at") = py::none(), py::arg("doc_threshold") = 0.8,
          py::arg("unit_threshold") = 0.7,
          "Empty dict when the query has no tokens after preprocessing.");

  // Inference and evaluation.
  m.def("map_output_to_label",
        [](const std::string& text) { return std::string(LabelWord(MapOutputToLabel(text))); },
        py::arg("text"));
  m.def(
      "mock_complete",
      [](const std::string& instruction, const std::string& content) {
        MockBackend mock;
        return mock.Complete(PromptEnvelope::Make(instruction, content), CompletionParams{});
      },
      py::arg("instruction"), py::arg("content"));
  m.def(
      "compute_metrics",
      [](const std::array<std::array<std::uint64_t, 3>, 3>& counts) {
        ConfusionMatrix cm;
        cm.counts = counts;
        return ReportDict(ComputeMetrics(cm));
      },
      py::arg("confusion"), "counts[gold][predicted], order negative/neutral/positive.");
  m.def(
      "evaluate_mock",
      [](const std::string& formatted_jsonl, CorpusStore* store) {
        std::vector<InstructionRecord> records;
        std::istringstream in(formatted_jsonl);
        std::string line;
        std::size_t no = 0;
        while (std::getline(in, line)) {
          ++no;
          if (!IsBlank(line)) records.push_back(InstructionRecordFromJson(line, no));
        }
        MockBackend mock;
        EvalOptions opts;
        opts.use_rag = store != nullptr;
        return ReportDict(RunEval(records, mock, store, opts).report);
      },
      py::arg("formatted_jsonl"), py::arg("store") = nullptr);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = RunCli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line; returns (exit_code, stdout, stderr).");
}

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

#include "finrag/toy_lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "finrag/error.hpp"
#include "finrag/util.hpp"
#include "json.hpp"

namespace finrag {

// ---------------------------------------------------------------------------
// Parameters

ToyLMParams::ToyLMParams(ModelShape shape) : shape_(shape) {
  if (shape.vocab_size < 2 || shape.embed_dim == 0 || shape.window == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "model needs vocab_size >= 2 and positive embed_dim/window");
  }
  const std::size_t v = shape.vocab_size, d = shape.embed_dim,
                    k = shape.window;
  data_.assign(v * d + k * d * v + v, 0.0);
}

ToyLMParams ToyLMParams::Random(ModelShape shape, std::uint64_t seed,
                                double stddev) {
  ToyLMParams p(shape);
  Rng rng(seed);
  for (double& x : p.data_) x = rng.Normal(0.0, stddev);
  return p;
}

ToyLMParams::MatrixMap ToyLMParams::embeddings() {
  return MatrixMap(data_.data(), shape_.vocab_size, shape_.embed_dim);
}
ToyLMParams::ConstMatrixMap ToyLMParams::embeddings() const {
  return ConstMatrixMap(data_.data(), shape_.vocab_size, shape_.embed_dim);
}
ToyLMParams::MatrixMap ToyLMParams::projection() {
  return MatrixMap(data_.data() + shape_.vocab_size * shape_.embed_dim,
                   shape_.window * shape_.embed_dim, shape_.vocab_size);
}
ToyLMParams::ConstMatrixMap ToyLMParams::projection() const {
  return ConstMatrixMap(data_.data() + shape_.vocab_size * shape_.embed_dim,
                        shape_.window * shape_.embed_dim, shape_.vocab_size);
}
ToyLMParams::VectorMap ToyLMParams::bias() {
  return VectorMap(data_.data() + data_.size() - shape_.vocab_size,
                   shape_.vocab_size);
}
ToyLMParams::ConstVectorMap ToyLMParams::bias() const {
  return ConstVectorMap(data_.data() + data_.size() - shape_.vocab_size,
                        shape_.vocab_size);
}

void ToyLMParams::SetZero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool ToyLMParams::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

void CheckIds(const ToyLMParams& params, std::span<const TokenId> seq) {
  for (TokenId id : seq) {
    if (id >= params.shape().vocab_size) {
      throw Error(ErrorCode::kTokenIdOutOfRange,
                  "token id " + std::to_string(id) + " >= vocab size " +
                      std::to_string(params.shape().vocab_size));
    }
  }
}

TokenId ContextToken(const ToyLMParams& params, std::span<const TokenId> seq,
                     std::size_t t, std::size_t j) {
  // Slot j holds token t-1-j.
  return t >= j + 1 ? seq[t - 1 - j] : params.pad_id();
}

// Rows of concatenated context embeddings, one per position.
RowMatrix ContextMatrix(const ToyLMParams& params,
                        std::span<const TokenId> seq) {
  const std::size_t d = params.shape().embed_dim, k = params.shape().window;
  auto embed = params.embeddings();
  RowMatrix h(seq.size(), k * d);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      h.block(t, j * d, 1, d) = embed.row(ContextToken(params, seq, t, j));
    }
  }
  return h;
}

void LogSoftmaxRows(RowMatrix& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    double mx = row.maxCoeff();
    double lse = mx + std::log((row.array() - mx).exp().sum());
    row.array() -= lse;
  }
}

}  // namespace

RowMatrix ForwardLogProbs(const ToyLMParams& params,
                          std::span<const TokenId> seq) {
  if (seq.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "sequence must be non-empty");
  }
  CheckIds(params, seq);
  RowMatrix h = ContextMatrix(params, seq);
  RowMatrix logits = h * params.projection();
  logits.rowwise() += params.bias().transpose();
  LogSoftmaxRows(logits);
  return logits;
}

double ClmNll(const ToyLMParams& params, std::span<const TokenId> seq) {
  if (seq.size() < 2) {
    throw Error(ErrorCode::kSequenceTooShort,
                "need at least two tokens, got " + std::to_string(seq.size()));
  }
  RowMatrix logp = ForwardLogProbs(params, seq);
  double nll = 0.0;
  for (std::size_t t = 1; t < seq.size(); ++t) nll -= logp(t, seq[t]);
  return nll;
}

double ClmNllAndGrad(const ToyLMParams& params, std::span<const TokenId> seq,
                     ToyLMParams& grad) {
  if (seq.size() < 2) {
    throw Error(ErrorCode::kSequenceTooShort,
                "need at least two tokens, got " + std::to_string(seq.size()));
  }
  if (!(grad.shape() == params.shape())) {
    throw Error(ErrorCode::kShapeMismatch, "gradient buffer shape");
  }
  CheckIds(params, seq);
  const std::size_t d = params.shape().embed_dim, k = params.shape().window;
  const std::size_t n = seq.size() - 1;  // scored positions 1..T-1

  // Only scored rows are needed for the loss, so work on positions 1..T-1.
  RowMatrix h = ContextMatrix(params, seq).bottomRows(n);
  RowMatrix logits = h * params.projection();
  logits.rowwise() += params.bias().transpose();
  LogSoftmaxRows(logits);

  double nll = 0.0;
  RowMatrix dlogits = logits.array().exp();  // softmax
  for (std::size_t r = 0; r < n; ++r) {
    TokenId target = seq[r + 1];
    nll -= logits(r, target);
    dlogits(r, target) -= 1.0;
  }

  grad.bias() += dlogits.colwise().sum().transpose();
  grad.projection().noalias() += h.transpose() * dlogits;
  RowMatrix dh = dlogits * params.projection().transpose();
  auto dembed = grad.embeddings();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      dembed.row(ContextToken(params, seq, r + 1, j)) +=
          dh.block(r, j * d, 1, d);
    }
  }
  return nll;
}

ToyLMParams ClmGrad(const ToyLMParams& params, std::span<const TokenId> seq) {
  ToyLMParams grad(params.shape());
  ClmNllAndGrad(params, seq, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// AdamW

void AdamWStep(std::span<double> params, std::span<const double> grads,
               OptState& state) {
  if (grads.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "params has " + std::to_string(params.size()) +
                    " entries, grads has " + std::to_string(grads.size()));
  }
  if (state.m.empty() && state.v.empty() && state.step == 0) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer state size");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw Error(ErrorCode::kNonFiniteGradient,
                  "gradient entry " + std::to_string(i) + " is not finite");
    }
  }
  const auto& hp = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hp.beta1, t);
  const double bc2 = 1.0 - std::pow(hp.beta2, t);
  const double decay = 1.0 - hp.lr * hp.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
    state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
    double m_hat = state.m[i] / bc1;
    double v_hat = state.v[i] / bc2;
    params[i] = params[i] * decay - hp.lr * m_hat / (std::sqrt(v_hat) + hp.eps);
  }
}

// ---------------------------------------------------------------------------
// Training

TrainConfig TrainConfig::Full() {
  TrainConfig c;
  c.epochs = 10;
  c.batch_size = 32;
  c.lr = 1e-5;
  c.weight_decay = 0.1;
  c.max_seq_len = 512;
  return c;
}

TrainConfig TrainConfig::Toy() { return TrainConfig{}; }

TrainConfig TrainConfig::Profile(std::string_view name) {
  if (name == "full") return Full();
  if (name == "toy") return Toy();
  throw Error(ErrorCode::kConfigError,
              "unknown training profile '" + std::string(name) + "'");
}

void TrainConfig::Validate() const {
  if (batch_size == 0 || max_seq_len < 2 || !(lr > 0.0) ||
      !(weight_decay >= 0.0)) {
    throw Error(ErrorCode::kConfigError,
                "batch_size and lr must be positive, max_seq_len >= 2, "
                "weight_decay >= 0");
  }
}

TokenSequence MakeTrainingSequence(const Vocab& vocab, std::string_view text,
                                   std::size_t max_seq_len) {
  TokenSequence seq = vocab.Encode(text);
  seq.push_back(static_cast<TokenId>(vocab.size()));
  if (seq.size() > max_seq_len) {
    seq.erase(seq.begin(), seq.end() - static_cast<std::ptrdiff_t>(max_seq_len));
  }
  return seq;
}

double MeanTokenNll(const ToyLMParams& params,
                    std::span<const TokenSequence> sequences) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& seq : sequences) {
    if (seq.size() < 2) continue;
    total += ClmNll(params, seq);
    tokens += seq.size() - 1;
  }
  return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
}

namespace {

// Sums per-sequence gradients of one batch into `grad` in batch order.
double BatchGradient(const ToyLMParams& params,
                     const std::vector<TokenSequence>& sequences,
                     std::span<const std::size_t> batch,
                     std::vector<ToyLMParams>& scratch, ToyLMParams& grad) {
  const std::size_t workers = std::min<std::size_t>(
      std::max(1u, std::thread::hardware_concurrency()), batch.size());
  while (scratch.size() < batch.size()) scratch.emplace_back(params.shape());
  std::vector<double> losses(batch.size(), 0.0);
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < batch.size(); i += workers) {
      scratch[i].SetZero();
      losses[i] = ClmNllAndGrad(params, sequences[batch[i]], scratch[i]);
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work, w);
    work(0);
    for (auto& t : threads) t.join();
  }
  grad.SetZero();
  auto g = grad.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto s = scratch[i].data();
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += s[j];
    loss += losses[i];
  }
  return loss;
}

}  // namespace

TrainResult Train(std::span<const std::string> texts, const Vocab& vocab,
                  const TrainConfig& config, const ModelConfig& model,
                  const std::function<void(std::size_t, double)>& on_epoch) {
  config.Validate();
  if (texts.empty()) throw Error(ErrorCode::kEmptyDataset, "no training text");

  ModelShape shape{vocab.size() + 1, model.embed_dim, model.window};
  std::vector<TokenSequence> sequences;
  sequences.reserve(texts.size());
  for (const auto& text : texts) {
    auto seq = MakeTrainingSequence(vocab, text, config.max_seq_len);
    if (seq.size() >= 2) sequences.push_back(std::move(seq));
  }
  if (sequences.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "no sequence has two tokens");
  }

  Rng init_rng(Mix64(config.seed ^ 0x1e7a11ULL));
  TrainResult result{ToyLMParams::Random(shape, init_rng.NextU64(), model.init_std),
                     0.0, {}};
  result.initial_loss = MeanTokenNll(result.params, sequences);

  OptState state = OptState::ForSize(
      result.params.size(),
      AdamWHyper{config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  ToyLMParams grad(shape);
  std::vector<ToyLMParams> scratch;
  std::vector<std::size_t> order(sequences.size());
  Rng shuffle_rng(Mix64(config.seed ^ 0x5bd1e995ULL));

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.Shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      std::size_t end = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> batch(order.data() + start, end - start);
      std::size_t tokens = 0;
      for (auto i : batch) tokens += sequences[i].size() - 1;
      double loss = BatchGradient(result.params, sequences, batch, scratch, grad);
      // Optimize the mean per-token loss of the batch.
      const double scale = 1.0 / static_cast<double>(tokens);
      for (double& g : grad.data()) g *= scale;
      AdamWStep(result.params.data(), grad.data(), state);
      epoch_loss += loss;
      epoch_tokens += tokens;
    }
    double mean = epoch_loss / static_cast<double>(epoch_tokens);
    result.loss_curve.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  return result;
}

std::string Generate(const ToyLMParams& params, const Vocab& vocab,
                     std::string_view prompt, std::size_t max_new_tokens) {
  if (max_new_tokens == 0) {
    throw Error(ErrorCode::kInvalidArgument, "max_new_tokens must be >= 1");
  }
  if (params.shape().vocab_size != vocab.size() + 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "model vocab_size " + std::to_string(params.shape().vocab_size) +
                    " does not match tokenizer size + 1 = " +
                    std::to_string(vocab.size() + 1));
  }
  const std::size_t d = params.shape().embed_dim, k = params.shape().window;
  TokenSequence seq = vocab.Encode(prompt);
  const std::size_t prompt_len = seq.size();
  auto embed = params.embeddings();
  Eigen::RowVectorXd h(k * d);
  for (std::size_t step = 0; step < max_new_tokens; ++step) {
    const std::size_t t = seq.size();
    for (std::size_t j = 0; j < k; ++j) {
      h.segment(j * d, d) = embed.row(ContextToken(params, seq, t, j));
    }
    Eigen::RowVectorXd logits = h * params.projection();
    logits += params.bias().transpose();
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < logits.size(); ++i) {
      if (logits[i] > logits[best]) best = i;
    }
    if (static_cast<TokenId>(best) == params.pad_id()) break;
    seq.push_back(static_cast<TokenId>(best));
  }
  return vocab.Decode(std::span<const TokenId>(seq).subspan(prompt_len));
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string CheckpointToJson(const Checkpoint& checkpoint) {
  const auto& p = checkpoint.params;
  nlohmann::json doc;
  doc["format"] = "finrag-toylm";
  doc["version"] = 1;
  doc["vocab_size"] = p.shape().vocab_size;
  doc["embed_dim"] = p.shape().embed_dim;
  doc["window"] = p.shape().window;
  doc["vocab_hash"] = checkpoint.vocab_hash;
  const auto& c = checkpoint.config;
  doc["train_config"] = {{"epochs", c.epochs},
                         {"batch_size", c.batch_size},
                         {"lr", c.lr},
                         {"weight_decay", c.weight_decay},
                         {"max_seq_len", c.max_seq_len},
                         {"seed", c.seed}};
  doc["params"] = std::vector<double>(p.data().begin(), p.data().end());
  return doc.dump();
}

Checkpoint CheckpointFromJson(std::string_view text) {
  try {
    auto doc = nlohmann::json::parse(text);
    if (doc.value("format", "") != "finrag-toylm" ||
        doc.value("version", 0) != 1) {
      throw Error(ErrorCode::kInvalidArgument, "not a v1 toy model checkpoint");
    }
    ModelShape shape{doc.at("vocab_size").get<std::size_t>(),
                     doc.at("embed_dim").get<std::size_t>(),
                     doc.at("window").get<std::size_t>()};
    Checkpoint out{ToyLMParams(shape), doc.value("vocab_hash", ""), {}};
    const auto& values = doc.at("params");
    if (!values.is_array() || values.size() != out.params.size()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "checkpoint parameter count does not match its shape");
    }
    auto data = out.params.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = values[i].get<double>();
    const auto& c = doc.at("train_config");
    out.config.epochs = c.at("epochs").get<std::size_t>();
    out.config.batch_size = c.at("batch_size").get<std::size_t>();
    out.config.lr = c.at("lr").get<double>();
    out.config.weight_decay = c.at("weight_decay").get<double>();
    out.config.max_seq_len = c.at("max_seq_len").get<std::size_t>();
    out.config.seed = c.at("seed").get<std::uint64_t>();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("checkpoint: ") + e.what());
  }
}

void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint) {
  WriteFile(path, CheckpointToJson(checkpoint));
}

Checkpoint LoadCheckpoint(const std::string& path) {
  return CheckpointFromJson(ReadFile(path));
}

std::string LossCurveCsv(double initial_loss, std::span<const double> curve) {
  std::string out = "epoch,mean_nll\n";
  char buf[64];
  for (std::size_t i = 0; i <= curve.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i,
                  i == 0 ? initial_loss : curve[i - 1]);
    out += buf;
  }
  return out;
}

}  // namespace finrag

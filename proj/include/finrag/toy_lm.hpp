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

// Desk-scale causal language model used to exercise the instruction-tuning
// objective end to end.
//
// The model reads the previous `window` tokens, concatenates their
// embeddings and applies one linear layer plus softmax:
//
//   h_t     = [E[w_{t-1}], E[w_{t-2}], ..., E[w_{t-k}]]       (k*d)
//   logit_t = h_t U + b                                       (V)
//
// Positions before the start of the sequence read the pad token. The pad
// token doubles as end-of-text and is always id V-1.

#ifndef FINRAG_TOY_LM_HPP_
#define FINRAG_TOY_LM_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "finrag/bpe.hpp"

namespace finrag {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelShape {
  std::size_t vocab_size = 512;
  std::size_t embed_dim = 32;
  std::size_t window = 8;

  bool operator==(const ModelShape&) const = default;
};

/// Model parameters stored in one contiguous buffer laid out as
/// [E (V x d, row-major) | U (k*d x V, row-major) | b (V)].
class ToyLMParams {
 public:
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;
  using VectorMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

  /// All-zero parameters.
  explicit ToyLMParams(ModelShape shape);
  /// Gaussian N(0, stddev^2) initialization.
  static ToyLMParams Random(ModelShape shape, std::uint64_t seed,
                            double stddev = 0.02);

  const ModelShape& shape() const { return shape_; }
  TokenId pad_id() const { return static_cast<TokenId>(shape_.vocab_size - 1); }
  std::size_t size() const { return data_.size(); }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  MatrixMap embeddings();
  ConstMatrixMap embeddings() const;
  MatrixMap projection();
  ConstMatrixMap projection() const;
  VectorMap bias();
  ConstVectorMap bias() const;

  void SetZero();
  bool AllFinite() const;

  bool operator==(const ToyLMParams& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  ModelShape shape_;
  std::vector<double> data_;
};

/// T x V log-probabilities; row t is the distribution of token t given
/// tokens 0..t-1. Throws Error(kTokenIdOutOfRange) or
/// Error(kInvalidArgument) for an empty sequence.
RowMatrix ForwardLogProbs(const ToyLMParams& params,
                          std::span<const TokenId> seq);

/// -sum_{t>=1} log P(w_t | w_<t). Position 0 has no real context and is not
/// scored. Throws Error(kSequenceTooShort) when seq.size() < 2.
double ClmNll(const ToyLMParams& params, std::span<const TokenId> seq);

/// Exact gradient of ClmNll, shaped like the parameters.
ToyLMParams ClmGrad(const ToyLMParams& params, std::span<const TokenId> seq);

/// Loss and gradient in one pass. The gradient is accumulated into `grad`
/// (which must have the same shape). Returns the loss.
double ClmNllAndGrad(const ToyLMParams& params, std::span<const TokenId> seq,
                     ToyLMParams& grad);

// ---------------------------------------------------------------------------
// AdamW

struct AdamWHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct OptState {
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
  AdamWHyper hyper;

  static OptState ForSize(std::size_t n, AdamWHyper hyper) {
    return {0, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), hyper};
  }
};

/// One AdamW update in place. Weight decay is decoupled: params are scaled
/// by (1 - lr * weight_decay) before the Adam step, never folded into the
/// gradient. Moments are bias-corrected.
///
/// Throws Error(kShapeMismatch) when sizes disagree and
/// Error(kNonFiniteGradient) before touching anything if a gradient entry is
/// NaN or infinite.
void AdamWStep(std::span<double> params, std::span<const double> grads,
               OptState& state);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 4;
  double lr = 1e-3;
  double weight_decay = 0.01;
  std::size_t max_seq_len = 512;
  std::uint64_t seed = 0;

  /// Large-model fine-tuning hyperparameters; too gentle for the toy model.
  static TrainConfig Full();
  /// Defaults for the desk-scale model.
  static TrainConfig Toy();
  /// "full" or "toy"; throws Error(kConfigError) otherwise.
  static TrainConfig Profile(std::string_view name);

  void Validate() const;
};

struct ModelConfig {
  std::size_t embed_dim = 32;
  std::size_t window = 8;
  double init_std = 0.02;
};

struct TrainResult {
  ToyLMParams params;
  /// Mean per-token NLL before any update.
  double initial_loss = 0.0;
  /// Mean per-token NLL over each epoch, measured as the epoch runs.
  std::vector<double> loss_curve;
};

/// Converts text into a training sequence: BPE ids followed by the
/// end-of-text id, keeping the last max_seq_len ids if longer.
TokenSequence MakeTrainingSequence(const Vocab& vocab, std::string_view text,
                                   std::size_t max_seq_len);

/// Trains a fresh model with vocab_size = vocab.size() + 1 on `texts`.
/// Deterministic for a given seed. Throws Error(kEmptyDataset).
TrainResult Train(std::span<const std::string> texts, const Vocab& vocab,
                  const TrainConfig& config, const ModelConfig& model = {},
                  const std::function<void(std::size_t, double)>& on_epoch = {});

/// Mean per-token NLL over a set of sequences.
double MeanTokenNll(const ToyLMParams& params,
                    std::span<const TokenSequence> sequences);

/// Greedy decoding: argmax at every step with ties going to the lowest id.
/// Stops at end-of-text or after max_new_tokens. Returns only the new text.
/// Throws Error(kInvalidArgument) when max_new_tokens == 0 and
/// Error(kShapeMismatch) when the model does not match the vocabulary.
std::string Generate(const ToyLMParams& params, const Vocab& vocab,
                     std::string_view prompt, std::size_t max_new_tokens);

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  ToyLMParams params;
  std::string vocab_hash;
  TrainConfig config;
};

std::string CheckpointToJson(const Checkpoint& checkpoint);
Checkpoint CheckpointFromJson(std::string_view text);
void SaveCheckpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint LoadCheckpoint(const std::string& path);

/// "epoch,mean_nll" CSV. Row 0 is the loss before training.
std::string LossCurveCsv(double initial_loss, std::span<const double> curve);

}  // namespace finrag

#endif  // FINRAG_TOY_LM_HPP_

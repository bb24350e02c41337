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

#ifndef FINRAG_BPE_HPP_
#define FINRAG_BPE_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace finrag {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

struct MergeRule {
  std::string left;
  std::string right;
  std::string merged;  // left + right
  std::size_t rank = 0;
};

/// Byte-level BPE vocabulary. Ids 0..255 are the single bytes; every merge
/// that produces a new byte string appends one id.
class Vocab {
 public:
  /// Base alphabet only.
  Vocab();

  /// Replays `merges` (as [left, right] pairs) on top of the byte alphabet.
  static Vocab FromMerges(
      const std::vector<std::pair<std::string, std::string>>& merges);

  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<MergeRule>& merges() const { return merges_; }
  const std::string& token(TokenId id) const;
  /// Id of `token`, or size() when absent.
  TokenId id_of(std::string_view token) const;

  TokenSequence Encode(std::string_view text) const;
  /// Throws Error(kUnknownTokenId) for ids >= size().
  std::string Decode(std::span<const TokenId> ids) const;
  std::size_t CountTokens(std::string_view text) const {
    return Encode(text).size();
  }

  /// JSON with "merges" as an ordered array of [left, right] strings where
  /// backslash and bytes outside printable ASCII are written as \\ and \xHH.
  std::string ToJson() const;
  static Vocab FromJson(std::string_view text);
  /// SHA-256 of the merge list; identifies the vocabulary in checkpoints.
  std::string Hash() const;

  bool operator==(const Vocab& other) const {
    return id_to_token_ == other.id_to_token_ && MergePairs() == other.MergePairs();
  }

  std::vector<std::pair<std::string, std::string>> MergePairs() const;

 private:
  friend Vocab TrainBpe(std::span<const std::string> corpus,
                        std::size_t target_vocab_size);
  void AddMerge(const std::string& left, const std::string& right);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<MergeRule> merges_;
  // (left id, right id) -> (rank, merged id)
  std::map<std::pair<TokenId, TokenId>, std::pair<std::size_t, TokenId>>
      merge_index_;
};

/// Learns merges greedily by descending pair frequency until the vocabulary
/// holds `target_vocab_size` tokens or no adjacent pair remains.
///
/// Text is split into maximal whitespace and non-whitespace runs; pairs are
/// counted only inside non-whitespace runs, so merges never cross a
/// whitespace boundary. Repeated identical symbols are counted without
/// overlap ("aaaa" contributes 2 to (a, a)). Ties go to the
/// lexicographically smallest (left bytes, right bytes).
///
/// Throws Error(kEmptyCorpus) or Error(kVocabTooSmall, target < 257).
Vocab TrainBpe(std::span<const std::string> corpus,
               std::size_t target_vocab_size);

/// Byte escaping used by the vocab file format.
std::string EscapeBytes(std::string_view bytes);
std::string UnescapeBytes(std::string_view escaped);

/// Splits text into alternating whitespace / non-whitespace runs.
std::vector<std::string_view> SplitRuns(std::string_view text);

}  // namespace finrag

#endif  // FINRAG_BPE_HPP_

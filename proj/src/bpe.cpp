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

#include "finrag/bpe.hpp"

#include <limits>

#include "finrag/error.hpp"
#include "finrag/util.hpp"
#include "json.hpp"

namespace finrag {

namespace {

bool IsSpaceByte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

// Replaces every non-overlapping left-to-right occurrence of (a, b) in
// `symbols` with `merged`.
void ApplyMerge(std::vector<TokenId>& symbols, TokenId a, TokenId b,
                TokenId merged) {
  std::size_t out = 0;
  for (std::size_t i = 0; i < symbols.size();) {
    if (i + 1 < symbols.size() && symbols[i] == a && symbols[i + 1] == b) {
      symbols[out++] = merged;
      i += 2;
    } else {
      symbols[out++] = symbols[i++];
    }
  }
  symbols.resize(out);
}

}  // namespace

std::vector<std::string_view> SplitRuns(std::string_view text) {
  std::vector<std::string_view> runs;
  std::size_t start = 0;
  while (start < text.size()) {
    bool space = IsSpaceByte(static_cast<unsigned char>(text[start]));
    std::size_t end = start + 1;
    while (end < text.size() &&
           IsSpaceByte(static_cast<unsigned char>(text[end])) == space) {
      ++end;
    }
    runs.push_back(text.substr(start, end - start));
    start = end;
  }
  return runs;
}

Vocab::Vocab() {
  id_to_token_.reserve(256);
  for (int b = 0; b < 256; ++b) {
    std::string tok(1, static_cast<char>(b));
    token_to_id_.emplace(tok, static_cast<TokenId>(b));
    id_to_token_.push_back(std::move(tok));
  }
}

Vocab Vocab::FromMerges(
    const std::vector<std::pair<std::string, std::string>>& merges) {
  Vocab v;
  for (const auto& [left, right] : merges) {
    if (v.id_of(left) == v.size() || v.id_of(right) == v.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "merge references unknown token '" + EscapeBytes(left) +
                      "' + '" + EscapeBytes(right) + "'");
    }
    v.AddMerge(left, right);
  }
  return v;
}

void Vocab::AddMerge(const std::string& left, const std::string& right) {
  std::string merged = left + right;
  TokenId merged_id;
  if (auto it = token_to_id_.find(merged); it != token_to_id_.end()) {
    merged_id = it->second;
  } else {
    merged_id = static_cast<TokenId>(id_to_token_.size());
    token_to_id_.emplace(merged, merged_id);
    id_to_token_.push_back(merged);
  }
  std::size_t rank = merges_.size();
  merges_.push_back({left, right, merged, rank});
  merge_index_.emplace(std::make_pair(token_to_id_.at(left), token_to_id_.at(right)),
                       std::make_pair(rank, merged_id));
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= id_to_token_.size()) {
    throw Error(ErrorCode::kUnknownTokenId, std::to_string(id));
  }
  return id_to_token_[id];
}

TokenId Vocab::id_of(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? static_cast<TokenId>(size()) : it->second;
}

TokenSequence Vocab::Encode(std::string_view text) const {
  TokenSequence out;
  out.reserve(text.size());
  std::vector<TokenId> symbols;
  for (std::string_view run : SplitRuns(text)) {
    symbols.assign(run.begin(), run.end());
    for (auto& s : symbols) s = static_cast<unsigned char>(s);
    if (!IsSpaceByte(static_cast<unsigned char>(run.front()))) {
      // Merges are applied in rank order: find the lowest-ranked merge not
      // yet passed that applies anywhere, apply it everywhere, continue.
      std::size_t cursor = 0;
      while (symbols.size() > 1) {
        std::size_t best_rank = std::numeric_limits<std::size_t>::max();
        std::pair<TokenId, TokenId> best_pair{};
        TokenId best_merged = 0;
        for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
          auto it = merge_index_.find({symbols[i], symbols[i + 1]});
          if (it != merge_index_.end() && it->second.first >= cursor &&
              it->second.first < best_rank) {
            best_rank = it->second.first;
            best_pair = it->first;
            best_merged = it->second.second;
          }
        }
        if (best_rank == std::numeric_limits<std::size_t>::max()) break;
        ApplyMerge(symbols, best_pair.first, best_pair.second, best_merged);
        cursor = best_rank + 1;
      }
    }
    out.insert(out.end(), symbols.begin(), symbols.end());
  }
  return out;
}

std::string Vocab::Decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) out += token(id);
  return out;
}

std::vector<std::pair<std::string, std::string>> Vocab::MergePairs() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(merges_.size());
  for (const auto& m : merges_) out.emplace_back(m.left, m.right);
  return out;
}

std::string EscapeBytes(std::string_view bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (char ch : bytes) {
    auto c = static_cast<unsigned char>(ch);
    if (c == '\\') {
      out += "\\\\";
    } else if (c >= 0x20 && c < 0x7f) {
      out.push_back(ch);
    } else {
      out += "\\x";
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xf]);
    }
  }
  return out;
}

std::string UnescapeBytes(std::string_view escaped) {
  auto hex = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw Error(ErrorCode::kInvalidArgument, "bad hex escape in vocab");
  };
  std::string out;
  for (std::size_t i = 0; i < escaped.size(); ++i) {
    if (escaped[i] != '\\') {
      out.push_back(escaped[i]);
      continue;
    }
    if (i + 1 < escaped.size() && escaped[i + 1] == '\\') {
      out.push_back('\\');
      ++i;
    } else if (i + 3 < escaped.size() && escaped[i + 1] == 'x') {
      out.push_back(static_cast<char>(hex(escaped[i + 2]) * 16 +
                                      hex(escaped[i + 3])));
      i += 3;
    } else {
      throw Error(ErrorCode::kInvalidArgument, "bad escape in vocab");
    }
  }
  return out;
}

std::string Vocab::ToJson() const {
  nlohmann::json doc;
  doc["format"] = "finrag-bpe";
  doc["version"] = 1;
  doc["vocab_size"] = size();
  auto merges = nlohmann::json::array();
  for (const auto& m : merges_) {
    merges.push_back({EscapeBytes(m.left), EscapeBytes(m.right)});
  }
  doc["merges"] = std::move(merges);
  return doc.dump(1);
}

Vocab Vocab::FromJson(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("vocab: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("merges") || !doc["merges"].is_array()) {
    throw Error(ErrorCode::kInvalidArgument, "vocab: missing \"merges\" array");
  }
  std::vector<std::pair<std::string, std::string>> merges;
  for (const auto& m : doc["merges"]) {
    if (!m.is_array() || m.size() != 2 || !m[0].is_string() ||
        !m[1].is_string()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "vocab: merges must be [left, right] string pairs");
    }
    merges.emplace_back(UnescapeBytes(m[0].get<std::string>()),
                        UnescapeBytes(m[1].get<std::string>()));
  }
  Vocab v = FromMerges(merges);
  if (doc.contains("vocab_size") && doc["vocab_size"] != v.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "vocab: vocab_size does not match replayed merges");
  }
  return v;
}

std::string Vocab::Hash() const {
  std::string buf;
  for (const auto& m : merges_) {
    buf += EscapeBytes(m.left);
    buf.push_back('\0');
    buf += EscapeBytes(m.right);
    buf.push_back('\n');
  }
  return Sha256Hex(buf);
}

Vocab TrainBpe(std::span<const std::string> corpus,
               std::size_t target_vocab_size) {
  if (target_vocab_size < 257) {
    throw Error(ErrorCode::kVocabTooSmall,
                "target_vocab_size must be >= 257, got " +
                    std::to_string(target_vocab_size));
  }
  bool any = false;
  std::map<std::string, std::uint64_t> word_counts;
  for (const auto& text : corpus) {
    if (!text.empty()) any = true;
    for (auto run : SplitRuns(text)) {
      if (!IsSpaceByte(static_cast<unsigned char>(run.front()))) {
        ++word_counts[std::string(run)];
      }
    }
  }
  if (!any) throw Error(ErrorCode::kEmptyCorpus, "corpus has no text");

  struct Word {
    std::vector<TokenId> symbols;
    std::uint64_t count;
  };
  std::vector<Word> words;
  words.reserve(word_counts.size());
  for (const auto& [w, c] : word_counts) {
    Word word{{}, c};
    for (char ch : w) word.symbols.push_back(static_cast<unsigned char>(ch));
    words.push_back(std::move(word));
  }

  Vocab vocab;
  std::map<std::pair<TokenId, TokenId>, std::uint64_t> pair_counts;
  while (vocab.size() < target_vocab_size) {
    pair_counts.clear();
    for (const auto& w : words) {
      const auto& s = w.symbols;
      bool prev_counted = false;
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        // An (x, x) pair overlapping the one just counted is skipped.
        if (prev_counted && s[i] == s[i - 1] && s[i + 1] == s[i]) {
          prev_counted = false;
          continue;
        }
        pair_counts[{s[i], s[i + 1]}] += w.count;
        prev_counted = true;
      }
    }
    if (pair_counts.empty()) break;

    auto best = pair_counts.begin();
    for (auto it = std::next(pair_counts.begin()); it != pair_counts.end();
         ++it) {
      if (it->second > best->second) {
        best = it;
      } else if (it->second == best->second) {
        const auto& bl = vocab.token(best->first.first);
        const auto& br = vocab.token(best->first.second);
        const auto& il = vocab.token(it->first.first);
        const auto& ir = vocab.token(it->first.second);
        if (il < bl || (il == bl && ir < br)) best = it;
      }
    }
    auto [left, right] = best->first;
    vocab.AddMerge(vocab.token(left), vocab.token(right));
    TokenId merged = vocab.id_of(vocab.merges().back().merged);
    for (auto& w : words) ApplyMerge(w.symbols, left, right, merged);
  }
  return vocab;
}

}  // namespace finrag

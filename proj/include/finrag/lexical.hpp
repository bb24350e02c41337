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

// Lexical token sets shared by the corpus index and the retrieval filter.
//
// A token is a lowercased run of alphanumeric characters (ASCII letters and
// digits plus non-ASCII letters) that is not one of the 50 stopwords.
// Tickers are ordinary tokens: "$ENR" and "NYSE:ENR" both yield "enr".

#ifndef FINRAG_LEXICAL_HPP_
#define FINRAG_LEXICAL_HPP_

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace finrag {

using TokenSet = std::set<std::string, std::less<>>;

const std::set<std::string_view>& Stopwords();

/// Removes URLs and @mentions, strips the "$" of cashtags and the exchange
/// prefix of "NYSE:ENR"-style symbols, and collapses whitespace. Case is
/// preserved.
std::string CleanText(std::string_view raw);

/// Tokens of `text` in order, duplicates kept. Does not call CleanText.
std::vector<std::string> LexicalTokenSequence(std::string_view text);
TokenSet LexicalTokens(std::string_view text);

/// CleanText followed by LexicalTokens.
TokenSet CleanTokens(std::string_view text);

}  // namespace finrag

#endif  // FINRAG_LEXICAL_HPP_

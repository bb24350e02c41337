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

#include "finrag/lexical.hpp"

#include <regex>

#include "finrag/util.hpp"

namespace finrag {

const std::set<std::string_view>& Stopwords() {
  static const std::set<std::string_view> kWords = {
      "a",    "an",   "the",   "and",   "or",   "but",  "if",    "of",
      "at",   "by",   "for",   "with",  "about", "to",  "from",  "in",
      "on",   "is",   "are",   "was",   "were", "be",   "been",  "being",
      "it",   "its",  "this",  "that",  "these", "those", "as",  "i",
      "you",  "he",   "she",   "we",    "they", "me",   "him",   "her",
      "us",   "them", "my",    "our",   "your", "his",  "their", "s",
      "t",    "will",
  };
  return kWords;
}

std::string CleanText(std::string_view raw) {
  static const std::regex kUrl(R"((https?://|www\.)\S+)",
                               std::regex::ECMAScript | std::regex::icase);
  static const std::regex kMention(R"(@\w+)");
  static const std::regex kExchange(
      R"(\b(NYSE|NASDAQ|AMEX|NYSEARCA|NYSEAMERICAN|OTC|OTCMKTS|TSX|TSXV|LSE|ASX|HKEX|BATS|CBOE)\s*:\s*([A-Za-z][A-Za-z.]*))",
      std::regex::ECMAScript | std::regex::icase);
  static const std::regex kCashtag(R"(\$([A-Za-z][A-Za-z.]{0,9})\b)");
  static const std::regex kSpaces(R"(\s+)");

  std::string s(raw);
  s = std::regex_replace(s, kUrl, " ");
  s = std::regex_replace(s, kMention, " ");
  s = std::regex_replace(s, kExchange, "$2");
  s = std::regex_replace(s, kCashtag, "$1");
  s = std::regex_replace(s, kSpaces, " ");
  return std::string(Trim(s));
}

namespace {

// Decodes one UTF-8 code point starting at `i`, advancing `i`. Malformed
// bytes decode to U+FFFD one byte at a time.
char32_t NextCodePoint(std::string_view s, std::size_t& i) {
  auto c = static_cast<unsigned char>(s[i]);
  int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3
          : (c >> 3) == 0x1e ? 4 : 0;
  if (len == 0 || i + len > s.size()) {
    ++i;
    return 0xfffd;
  }
  char32_t cp = len == 1 ? c : c & (0x7f >> len);
  for (int k = 1; k < len; ++k) {
    auto cc = static_cast<unsigned char>(s[i + k]);
    if ((cc & 0xc0) != 0x80) {
      ++i;
      return 0xfffd;
    }
    cp = (cp << 6) | (cc & 0x3f);
  }
  i += len;
  return cp;
}

bool IsWordCodePoint(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') ||
           (cp >= '0' && cp <= '9');
  }
  if (cp <= 0xbf || cp == 0xd7 || cp == 0xf7) return false;  // Latin-1 symbols
  if (cp >= 0x2000 && cp <= 0x2bff) return false;  // punctuation, symbols
  if (cp >= 0x3000 && cp <= 0x303f) return false;  // CJK punctuation
  if (cp >= 0xfe30 && cp <= 0xfe6f) return false;
  if (cp >= 0xff00 && cp <= 0xff0f) return false;
  if (cp == 0xfeff || cp == 0xfffd) return false;
  return true;
}

}  // namespace

std::vector<std::string> LexicalTokenSequence(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&]() {
    if (!current.empty()) {
      if (!Stopwords().contains(current)) out.push_back(current);
      current.clear();
    }
  };
  for (std::size_t i = 0; i < text.size();) {
    std::size_t start = i;
    char32_t cp = NextCodePoint(text, i);
    if (IsWordCodePoint(cp)) {
      if (cp < 0x80) {
        char c = static_cast<char>(cp);
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        current.push_back(c);
      } else {
        current.append(text.substr(start, i - start));
      }
    } else {
      flush();
    }
  }
  flush();
  return out;
}

TokenSet LexicalTokens(std::string_view text) {
  auto seq = LexicalTokenSequence(text);
  return TokenSet(seq.begin(), seq.end());
}

TokenSet CleanTokens(std::string_view text) {
  return LexicalTokens(CleanText(text));
}

}  // namespace finrag

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

// Small helpers shared by several modules: string trimming, hashing,
// timestamps and a platform-independent random stream.

#ifndef FINRAG_UTIL_HPP_
#define FINRAG_UTIL_HPP_

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace finrag {

using UtcTime = std::chrono::sys_seconds;

std::string_view Trim(std::string_view s);
std::string AsciiLower(std::string_view s);
bool IsBlank(std::string_view s);

/// Reads a whole file; throws Error(kStorageFailure) when it cannot be opened.
std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, std::string_view contents);

/// Lowercase hex SHA-256 digest of `data`.
std::string Sha256Hex(std::string_view data);

/// Parses "YYYY-MM-DDTHH:MM:SS[.frac](Z|±HH:MM)". Fractional seconds are
/// truncated. Returns nullopt on any syntax error.
std::optional<UtcTime> ParseRfc3339(std::string_view text);
/// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string FormatRfc3339(UtcTime t);

/// SplitMix64 finalizer. Used both as a counter-based hash and to seed
/// streams.
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic random stream. The standard distributions are
/// implementation-defined, so uniform and normal draws are derived here from
/// raw 64-bit outputs to keep results identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t NextU64() {
    std::uint64_t z = state_;
    state_ += 0x9e3779b97f4a7c15ULL;
    return Mix64(z);
  }
  /// Uniform in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>(NextU64() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [0, n). Lemire-style rejection keeps it unbiased.
  std::uint64_t Below(std::uint64_t n);
  double Normal(double mean, double stddev);

  template <typename It>
  void Shuffle(It first, It last) {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      auto j = Below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t state_;
  std::optional<double> spare_normal_;
};

}  // namespace finrag

#endif  // FINRAG_UTIL_HPP_

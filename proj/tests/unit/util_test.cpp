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


#include "finrag/util.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>

namespace finrag {
namespace {

using std::chrono::sys_days;
using namespace std::chrono_literals;

TEST(Rfc3339Test, ParsesOffsetsAndFractions) {
  auto z = ParseRfc3339("2023-10-02T14:00:00Z");
  ASSERT_TRUE(z);
  EXPECT_EQ(*z, sys_days{std::chrono::year{2023} / 10 / 2} + 14h);
  EXPECT_EQ(ParseRfc3339("2023-10-02T16:00:00+02:00"), z);
  EXPECT_EQ(ParseRfc3339("2023-10-02T09:30:00-04:30"), z);
  EXPECT_EQ(ParseRfc3339("2023-10-02T14:00:00.987Z"), z);
  EXPECT_EQ(FormatRfc3339(*z), "2023-10-02T14:00:00Z");
}

TEST(Rfc3339Test, RejectsMalformed) {
  for (const char* bad : {"", "2023-10-02", "2023-10-02T14:00:00", "2023-13-02T14:00:00Z",
                          "2023-10-02T14:00:00+0200",
                          "2023-10-02T14:00:00Zjunk", "2023-02-30T00:00:00Z"}) {
    EXPECT_FALSE(ParseRfc3339(bad)) << bad;
  }
}

TEST(Rfc3339Test, FormatRoundTrip) {
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    UtcTime t{std::chrono::seconds(static_cast<long long>(rng.Below(4'000'000'000ULL)))};
    EXPECT_EQ(ParseRfc3339(FormatRfc3339(t)), t);
  }
}

TEST(Sha256Test, KnownVectors) {
  EXPECT_EQ(Sha256Hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(Sha256Hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(StringTest, TrimLowerBlank) {
  EXPECT_EQ(Trim("  a b \n"), "a b");
  EXPECT_EQ(Trim(" \t "), "");
  EXPECT_EQ(AsciiLower("MiXeD \xC3\x89"), "mixed \xC3\x89");
  EXPECT_TRUE(IsBlank(" \n\t"));
  EXPECT_FALSE(IsBlank(" x "));
}

TEST(RngTest, ReproducibleStream) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    auto x = a.NextU64();
    EXPECT_EQ(x, b.NextU64());
    EXPECT_NE(x, c.NextU64());
  }
  // First SplitMix64 output for seed 0.
  EXPECT_EQ(Rng(0).NextU64(), 0xe220a8397b1dcdafULL);
}

TEST(RngTest, BelowIsInRangeAndRoughlyUniform) {
  Rng rng(9);
  std::array<int, 7> counts{};
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    auto v = rng.Below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += std::pow(c - n / 7.0, 2) / (n / 7.0);
  EXPECT_LT(chi2, 22.46);  // p = 0.001, 6 degrees of freedom
}

TEST(RngTest, NormalMoments) {
  Rng rng(10);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.Normal(1.0, 2.0);
    sum += x;
    sq += x * x;
  }
  double mean = sum / n;
  EXPECT_NEAR(mean, 1.0, 0.03);
  EXPECT_NEAR(sq / n - mean * mean, 4.0, 0.08);
}

TEST(RngTest, ShuffleIsPermutation) {
  Rng rng(11);
  std::vector<int> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i;
  rng.Shuffle(v.begin(), v.end());
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_NE(v, sorted);
}

}  // namespace
}  // namespace finrag

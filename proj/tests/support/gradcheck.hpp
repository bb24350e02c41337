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

#ifndef FINRAG_TESTS_SUPPORT_GRADCHECK_HPP_
#define FINRAG_TESTS_SUPPORT_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "finrag/toy_lm.hpp"
#include "finrag/util.hpp"
#include "oracles.hpp"

namespace finrag::testing {

// Flat indices to probe: a third in embedding rows the sequence actually
// uses (pad included), a third in the projection, a third in the bias.
inline std::vector<std::size_t> SampleCoordinates(const ToyLMParams& params,
                                                  const TokenSequence& seq,
                                                  std::size_t count, Rng& rng) {
  const auto& s = params.shape();
  const std::size_t e_size = s.vocab_size * s.embed_dim;
  const std::size_t u_size = s.window * s.embed_dim * s.vocab_size;
  std::vector<TokenId> rows(seq.begin(), seq.end());
  rows.push_back(params.pad_id());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) {
    switch (i % 3) {
      case 0: {
        TokenId row = rows[rng.Below(rows.size())];
        out.push_back(row * s.embed_dim + rng.Below(s.embed_dim));
        break;
      }
      case 1:
        out.push_back(e_size + rng.Below(u_size));
        break;
      default:
        out.push_back(e_size + u_size + rng.Below(s.vocab_size));
        break;
    }
  }
  return out;
}

// Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over the
// probed coordinates. The numeric side uses central differences of the
// long-double oracle, divided by the step actually representable in double.
inline double MaxRelativeError(const ToyLMParams& params, const TokenSequence& seq,
                               const std::vector<std::size_t>& coords, double h,
                               double floor = 1e-8) {
  const auto& s = params.shape();
  const ToyLMParams grad = ClmGrad(params, seq);
  std::vector<double> theta(params.data().begin(), params.data().end());
  double worst = 0.0;
  for (std::size_t idx : coords) {
    const double saved = theta[idx];
    const double up_x = saved + h;
    const double down_x = saved - h;
    theta[idx] = up_x;
    const long double up = oracle::Nll(theta, s.vocab_size, s.embed_dim, s.window, seq);
    theta[idx] = down_x;
    const long double down = oracle::Nll(theta, s.vocab_size, s.embed_dim, s.window, seq);
    theta[idx] = saved;
    const double numeric =
        static_cast<double>((up - down) / (static_cast<long double>(up_x) - down_x));
    const double analytic = grad.data()[idx];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace finrag::testing

#endif  // FINRAG_TESTS_SUPPORT_GRADCHECK_HPP_

// Copyright 2026 The qadagrad Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// Exhaustive search over all 3^d ternary code vectors. Verification only.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qadagrad/error.hpp"
#include "qadagrad/quantize.hpp"

namespace qadagrad {

inline constexpr std::size_t kOracleMaxDim = 20;

struct OracleResult {
  double scale = 0.0;
  std::vector<std::int8_t> codes;
  double error = 0.0;
};

inline OracleResult oracle_optimal_ternary(std::span<const double> v) {
  const std::size_t d = v.size();
  if (d == 0) throw Error("empty input");
  if (d > kOracleMaxDim) throw Error("oracle dimension too large: " + std::to_string(d));
  detail::check_finite(v);

  auto direct_error = [&](const std::vector<std::int8_t>& codes, double s) {
    double err = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double r = v[i] - s * codes[i];
      err += r * r;
    }
    return err;
  };

  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;

  // Odometer over digits {0, +1, -1}; dot = sum codes_i v_i and nnz are kept
  // incrementally. The closed-form error norm_sq - dot^2/nnz only ranks
  // candidates; anything near the incumbent is re-evaluated directly.
  std::vector<std::int8_t> codes(d, 0);
  double dot = 0.0;
  std::size_t nnz = 0;

  OracleResult best;
  best.codes = codes;
  best.error = norm_sq;
  double best_rank = norm_sq;
  const double slack = 1e-9 * norm_sq;

  while (true) {
    std::size_t i = 0;
    for (; i < d; ++i) {
      // 0 -> +1 -> -1 -> 0 (carry)
      if (codes[i] == 0) {
        codes[i] = 1;
        dot += v[i];
        ++nnz;
        break;
      }
      if (codes[i] == 1) {
        codes[i] = -1;
        dot -= 2.0 * v[i];
        break;
      }
      codes[i] = 0;
      dot += v[i];
      --nnz;
    }
    if (i == d) break;

    double s = dot > 0.0 ? dot / static_cast<double>(nnz) : 0.0;
    double rank = s > 0.0 ? norm_sq - dot * s : norm_sq;
    if (rank <= best_rank + slack) {
      // Recompute the scale from scratch so it does not carry odometer drift.
      double exact_dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) exact_dot += codes[j] * v[j];
      double exact_s = exact_dot > 0.0 ? exact_dot / static_cast<double>(nnz) : 0.0;
      double err = direct_error(codes, exact_s);
      if (err < best.error) {
        best.error = err;
        best.scale = exact_s;
        best.codes = codes;
      }
      best_rank = std::min(best_rank, rank);
    }
  }
  if (best.scale == 0.0) std::fill(best.codes.begin(), best.codes.end(), 0);
  return best;
}

}  // namespace qadagrad

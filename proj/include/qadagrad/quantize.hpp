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

/*!
 * \file quantize.hpp
 * \brief Ternary gradient quantizers.
 *
 * A ternary gradient is a non-negative scaler s and codes t in {-1, 0, +1}^d,
 * representing the dense vector s * t. Three producers are provided:
 *
 *  - stochastic ternarization (unbiased, scale = max |v_i|),
 *  - exact threshold quantization, which minimizes ||v - s t||^2 over all
 *    s >= 0 and ternary t by scanning sorted magnitudes (O(d log d)),
 *  - approximate threshold quantization with threshold 0.75 * mean |v_i|
 *    (O(d)).
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qadagrad/error.hpp"

namespace qadagrad {

enum class QuantizerKind { TernaryStochastic, ThresholdExact, ThresholdApprox, Identity };

inline std::string_view to_string(QuantizerKind k) {
  switch (k) {
    case QuantizerKind::TernaryStochastic: return "ternary";
    case QuantizerKind::ThresholdExact: return "threshold-exact";
    case QuantizerKind::ThresholdApprox: return "threshold-approx";
    case QuantizerKind::Identity: return "identity";
  }
  return "?";
}

inline QuantizerKind parse_quantizer(std::string_view s) {
  if (s == "ternary" || s == "stochastic") return QuantizerKind::TernaryStochastic;
  if (s == "threshold-exact" || s == "threshold") return QuantizerKind::ThresholdExact;
  if (s == "threshold-approx") return QuantizerKind::ThresholdApprox;
  if (s == "identity" || s == "none") return QuantizerKind::Identity;
  throw Error("unknown quantizer: " + std::string(s));
}

struct TernaryGradient {
  double scale = 0.0;
  std::vector<std::int8_t> codes;

  TernaryGradient() = default;
  explicit TernaryGradient(std::size_t dim) : codes(dim, 0) {}

  std::size_t dim() const { return codes.size(); }

  double value(std::size_t i) const { return scale * codes[i]; }

  std::vector<double> dense() const {
    std::vector<double> out(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) out[i] = scale * codes[i];
    return out;
  }

  bool valid() const {
    if (!(scale >= 0.0) || !std::isfinite(scale)) return false;
    for (auto c : codes) {
      if (c < -1 || c > 1) return false;
      if (scale == 0.0 && c != 0) return false;
    }
    return true;
  }

  friend bool operator==(const TernaryGradient&, const TernaryGradient&) = default;
};

namespace detail {

inline void check_quantizer_input(std::span<const double> v) {
  if (v.empty()) throw Error("empty input");
  check_finite(v);
}

// Codes sign(v_i) on {i : |v_i| > threshold}, scale = mean |v_i| over that set.
inline TernaryGradient threshold_at(std::span<const double> v, double threshold) {
  TernaryGradient q(v.size());
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > threshold) {
      sum += std::abs(v[i]);
      ++count;
      q.codes[i] = static_cast<std::int8_t>(sign(v[i]));
    }
  }
  if (count == 0 || sum == 0.0) return TernaryGradient(v.size());
  q.scale = sum / static_cast<double>(count);
  return q;
}

}  // namespace detail

/// TernGrad-style unbiased ternarization: scale = max|v_i|, and coordinate i
/// keeps sign(v_i) with probability |v_i| / scale. One uniform draw is
/// consumed per coordinate, zero coordinates included.
template <std::uniform_random_bit_generator Rng>
TernaryGradient quantize_ternary_stochastic(std::span<const double> v, Rng& rng) {
  detail::check_quantizer_input(v);
  TernaryGradient q(v.size());
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    double u = unit(rng);
    if (scale > 0.0 && u < std::abs(v[i]) / scale) {
      q.codes[i] = static_cast<std::int8_t>(detail::sign(v[i]));
    }
  }
  q.scale = scale;
  return q;
}

/// Result of the optimal-threshold scan, exposed for diagnostics.
struct ThresholdChoice {
  double threshold = 0.0;  // Delta*, codes are nonzero where |v_i| > threshold
  std::size_t support = 0;  // |I_Delta*|
  double objective = 0.0;  // J(Delta*) = (sum_{I} |v_i|)^2 / |I|
};

/// Maximizes J(Delta) = (sum_{|v_i| > Delta} |v_i|)^2 / |I_Delta| over the
/// distinct magnitudes of v. Candidate sets are the top-k magnitudes at
/// boundaries between distinct values; ties in J resolve to the larger set
/// (smaller Delta). Zero magnitudes never enter a candidate set.
inline ThresholdChoice optimal_threshold(std::span<const double> v) {
  std::vector<double> mags;
  mags.reserve(v.size());
  for (double x : v) {
    if (x != 0.0) mags.push_back(std::abs(x));
  }
  ThresholdChoice best;
  if (mags.empty()) return best;
  std::sort(mags.begin(), mags.end(), std::greater<>());

  double prefix = 0.0;
  for (std::size_t k = 1; k <= mags.size(); ++k) {
    prefix += mags[k - 1];
    // Only cut between distinct values: the set {|v_i| > Delta} cannot split ties.
    if (k < mags.size() && mags[k] == mags[k - 1]) continue;
    double j = prefix * prefix / static_cast<double>(k);
    if (j >= best.objective) {
      best.objective = j;
      best.support = k;
      // Below the smallest magnitude the threshold is any value in (0, min);
      // report half of it.
      best.threshold = k < mags.size() ? mags[k] : mags.back() * 0.5;
    }
  }
  return best;
}

/// Exact threshold quantization. Deterministic; the zero vector maps to the
/// zero TernaryGradient.
inline TernaryGradient quantize_threshold_exact(std::span<const double> v) {
  detail::check_quantizer_input(v);
  ThresholdChoice choice = optimal_threshold(v);
  if (choice.support == 0) return TernaryGradient(v.size());
  return detail::threshold_at(v, choice.threshold);
}

/// Threshold 0.75 * mean|v_i|. When that threshold zeroes every coordinate
/// the zero TernaryGradient is returned (no fallback to the exact scan).
inline TernaryGradient quantize_threshold_approx(std::span<const double> v) {
  detail::check_quantizer_input(v);
  double l1 = 0.0;
  for (double x : v) l1 += std::abs(x);
  double threshold = 0.75 * l1 / static_cast<double>(v.size());
  return detail::threshold_at(v, threshold);
}

/// ||v - scale * codes||_2^2
inline double quantization_error(std::span<const double> v, const TernaryGradient& q) {
  detail::check_same_dim(v.size(), q.dim(), "quantization_error");
  double err = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    double d = v[i] - q.scale * q.codes[i];
    err += d * d;
  }
  return err;
}

/// Dispatch for the three ternary producers. Identity has no ternary form and
/// is rejected here; callers route it around the quantizer.
template <std::uniform_random_bit_generator Rng>
TernaryGradient quantize(QuantizerKind kind, std::span<const double> v, Rng& rng) {
  switch (kind) {
    case QuantizerKind::TernaryStochastic: return quantize_ternary_stochastic(v, rng);
    case QuantizerKind::ThresholdExact: return quantize_threshold_exact(v);
    case QuantizerKind::ThresholdApprox: return quantize_threshold_approx(v);
    case QuantizerKind::Identity: break;
  }
  throw Error("identity quantizer has no ternary representation");
}

}  // namespace qadagrad

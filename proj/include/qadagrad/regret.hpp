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
 * \file regret.hpp
 * \brief Numerical checks of the adagrad regret analysis.
 *
 * Quantities, for a gradient stream q_1..q_T and H_t = delta + sqrt(sum_{tau<=t} q_tau^2):
 *
 *   lemma1_lhs = 1/2 sum_t sum_i q_{t,i}^2 / H_{t,ii}
 *   lemma2_lhs = 1/2 sum_t sum_i q_{t,i}^2 / H_{t-1,ii}     (H_0 = delta)
 *   rhs        = sum_i ||q_{1:T,i}||_2
 *   G_inf      = max_i ||q_{1:T,i}||_2
 *   D_inf      = max_t ||x* - x_t||_inf
 *
 * lemma1_lhs <= rhs always; lemma2_lhs <= rhs once delta >= max_t ||q_t||_inf.
 * Terms with a zero denominator have a zero numerator and count as 0.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "qadagrad/error.hpp"
#include "qadagrad/optimizer.hpp"

namespace qadagrad {

/// sum_i q_i^2 / H_ii
inline double dual_norm_sq(std::span<const double> q, const AdaptiveState& h) {
  detail::check_same_dim(q.size(), h.dim(), "dual_norm_sq");
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] == 0.0) continue;
    s += q[i] * q[i] / h.h(i);
  }
  return s;
}

/// sum_i ||q_{1:t,i}||_2
inline double accumulated_norm_sum(const AdaptiveState& h) {
  double s = 0.0;
  for (double a : h.sq_accum) s += std::sqrt(a);
  return s;
}

/// max_i ||q_{1:t,i}||_2
inline double accumulated_norm_max(const AdaptiveState& h) {
  double m = 0.0;
  for (double a : h.sq_accum) m = std::max(m, a);
  return std::sqrt(m);
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  detail::check_same_dim(a.size(), b.size(), "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// d G / sqrt(T) + d G D / (2 eta sqrt(T))
inline double mirror_descent_bound(std::size_t dim, double g_inf, double d_inf, double eta,
                                   std::size_t rounds) {
  double d = static_cast<double>(dim);
  double root_t = std::sqrt(static_cast<double>(rounds));
  return d * g_inf / root_t + d * g_inf * d_inf / (2.0 * eta * root_t);
}

/// delta ||x*||_2^2 / (eta T) + (||x*||_inf^2 / eta + eta^2 / 2) d G / sqrt(T)
inline double dual_averaging_bound(std::size_t dim, double g_inf, double delta, double eta,
                                   double ref_norm2_sq, double ref_norm_inf, std::size_t rounds) {
  double d = static_cast<double>(dim);
  double t = static_cast<double>(rounds);
  return delta * ref_norm2_sq / (eta * t) +
         (ref_norm_inf * ref_norm_inf / eta + eta * eta / 2.0) * d * g_inf / std::sqrt(t);
}

/// Full per-round history. objective[t] = f_t(x_t) + phi(x_t),
/// objective_next[t] = f_t(x_{t+1}) + phi(x_{t+1}),
/// reference_objective[t] = f_t(x*) + phi(x*). The objective vectors may be
/// empty when no reference is available.
struct RegretHistory {
  std::vector<std::vector<double>> q;
  std::vector<std::vector<double>> x;
  std::vector<double> objective;
  std::vector<double> objective_next;
  std::vector<double> reference_objective;
  std::vector<double> reference;
  double delta = 0.0;
  double eta = 1.0;
};

struct RegretReport {
  std::size_t rounds = 0;
  double average_regret = 0.0;       // evaluated at x_t
  double average_regret_next = 0.0;  // evaluated at x_{t+1}
  double lemma1_lhs = 0.0;
  double lemma2_lhs = 0.0;
  double lemma_rhs = 0.0;
  double max_q_inf = 0.0;
  double g_inf = 0.0;
  double d_inf = 0.0;
  double mirror_descent_bound = 0.0;
  double dual_averaging_bound = 0.0;
  bool has_reference = false;
};

inline RegretReport regret_diagnostics(const RegretHistory& hist) {
  if (hist.q.empty()) throw Error("empty history");
  const std::size_t rounds = hist.q.size();
  const std::size_t dim = hist.q.front().size();
  RegretReport r;
  r.rounds = rounds;

  AdaptiveState h;
  h.delta = hist.delta;
  h.sq_accum.assign(dim, 0.0);
  for (const auto& q : hist.q) {
    detail::check_same_dim(q.size(), dim, "regret_diagnostics");
    r.lemma2_lhs += 0.5 * dual_norm_sq(q, h);
    h.accumulate(q);
    r.lemma1_lhs += 0.5 * dual_norm_sq(q, h);
    r.max_q_inf = std::max(r.max_q_inf, max_abs(q));
  }
  r.lemma_rhs = accumulated_norm_sum(h);
  r.g_inf = accumulated_norm_max(h);

  r.has_reference = !hist.reference.empty();
  if (r.has_reference) {
    detail::check_same_dim(hist.objective.size(), rounds, "regret_diagnostics objective");
    detail::check_same_dim(hist.reference_objective.size(), rounds, "regret_diagnostics reference");
    double sum = 0.0;
    double sum_next = 0.0;
    for (std::size_t t = 0; t < rounds; ++t) {
      sum += hist.objective[t] - hist.reference_objective[t];
      if (!hist.objective_next.empty()) sum_next += hist.objective_next[t] - hist.reference_objective[t];
    }
    r.average_regret = sum / static_cast<double>(rounds);
    r.average_regret_next = sum_next / static_cast<double>(rounds);
    for (const auto& x : hist.x) r.d_inf = std::max(r.d_inf, max_abs_diff(hist.reference, x));
    double norm2_sq = 0.0;
    for (double v : hist.reference) norm2_sq += v * v;
    r.mirror_descent_bound = mirror_descent_bound(dim, r.g_inf, r.d_inf, hist.eta, rounds);
    r.dual_averaging_bound = dual_averaging_bound(dim, r.g_inf, hist.delta, hist.eta, norm2_sq,
                                                  max_abs(hist.reference), rounds);
  }
  return r;
}

}  // namespace qadagrad

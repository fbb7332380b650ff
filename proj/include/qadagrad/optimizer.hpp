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
 * \file optimizer.hpp
 * \brief l1-regularized update rules: proximal gradient, composite mirror
 * descent adagrad and regularized dual averaging adagrad, in full-precision
 * and quantized-gradient form.
 *
 * The adaptive matrix is diagonal, H_ii = delta + sqrt(sum_tau q_tau,i^2),
 * where the sum includes the gradient of the current round: every update
 * first accumulates q_i^2 and then takes the step.
 *
 * Quantized and full-precision variants share the same per-coordinate
 * kernels; they differ only in which gradient stream they are fed.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qadagrad/codec.hpp"
#include "qadagrad/error.hpp"

namespace qadagrad {

enum class Method { ProxGD, CMD, RDA, QCMD, QRDA };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::ProxGD: return "proxgd";
    case Method::CMD: return "cmd";
    case Method::RDA: return "rda";
    case Method::QCMD: return "qcmd";
    case Method::QRDA: return "qrda";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "proxgd" || s == "prox-gd") return Method::ProxGD;
  if (s == "cmd") return Method::CMD;
  if (s == "rda") return Method::RDA;
  if (s == "qcmd") return Method::QCMD;
  if (s == "qrda") return Method::QRDA;
  throw Error("unknown method: " + std::string(s));
}

inline bool is_quantized(Method m) { return m == Method::QCMD || m == Method::QRDA; }
inline bool is_dual_averaging(Method m) { return m == Method::RDA || m == Method::QRDA; }

struct OptimizerConfig {
  Method method = Method::QCMD;
  double eta = 0.1;
  double lambda = 0.0;
  double delta = 1e-8;

  void validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw Error("eta must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("lambda must be non-negative");
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw Error("delta must be non-negative");
    if ((method == Method::CMD || method == Method::QCMD) && delta == 0.0) {
      throw Error("delta must be positive for mirror-descent methods");
    }
  }
};

struct AdaptiveState {
  double delta = 0.0;
  std::vector<double> sq_accum;

  std::size_t dim() const { return sq_accum.size(); }
  double h(std::size_t i) const { return delta + std::sqrt(sq_accum[i]); }

  void accumulate(std::span<const double> q) {
    for (std::size_t i = 0; i < q.size(); ++i) sq_accum[i] += q[i] * q[i];
  }

  friend bool operator==(const AdaptiveState&, const AdaptiveState&) = default;
};

struct OptimizerState {
  std::vector<double> x;
  std::vector<double> grad_sum;
  std::uint64_t t = 0;
  AdaptiveState adaptive;

  static OptimizerState zeros(std::size_t dim, double delta) {
    OptimizerState s;
    s.x.assign(dim, 0.0);
    s.grad_sum.assign(dim, 0.0);
    s.adaptive.delta = delta;
    s.adaptive.sq_accum.assign(dim, 0.0);
    return s;
  }

  std::size_t dim() const { return x.size(); }

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

namespace kernel {

/// Soft-thresholded mirror-descent step for one coordinate.
inline double mirror_step(double x, double g, double h, double eta, double lambda) {
  double u = x - eta * g / h;
  double mag = std::abs(u) - lambda * eta / h;
  return mag > 0.0 ? detail::sign(u) * mag : 0.0;
}

/// Dual-averaging closed form for one coordinate after t rounds.
inline double dual_averaging_step(double grad_sum, double t, double h, double eta, double lambda) {
  double excess = std::abs(grad_sum) / t - lambda;
  if (!(excess > 0.0)) return 0.0;
  return detail::sign(-grad_sum) * t * eta / h * excess;
}

}  // namespace kernel

namespace detail {

inline void check_update_input(const OptimizerState& state, std::span<const double> g,
                               const char* where) {
  check_same_dim(state.dim(), g.size(), where);
  check_finite(g);
}

inline void mirror_update(OptimizerState& s, std::span<const double> g, const OptimizerConfig& cfg) {
  s.adaptive.accumulate(g);
  for (std::size_t i = 0; i < s.dim(); ++i) {
    s.x[i] = kernel::mirror_step(s.x[i], g[i], s.adaptive.h(i), cfg.eta, cfg.lambda);
  }
  ++s.t;
}

inline void dual_averaging_update(OptimizerState& s, std::span<const double> g,
                                  const OptimizerConfig& cfg) {
  s.adaptive.accumulate(g);
  for (std::size_t i = 0; i < s.dim(); ++i) s.grad_sum[i] += g[i];
  ++s.t;
  const double t = static_cast<double>(s.t);
  for (std::size_t i = 0; i < s.dim(); ++i) {
    s.x[i] = kernel::dual_averaging_step(s.grad_sum[i], t, s.adaptive.h(i), cfg.eta, cfg.lambda);
  }
}

inline void proximal_update(OptimizerState& s, std::span<const double> g, const OptimizerConfig& cfg) {
  s.adaptive.accumulate(g);
  for (std::size_t i = 0; i < s.dim(); ++i) {
    s.x[i] = kernel::mirror_step(s.x[i], g[i], 1.0, cfg.eta, cfg.lambda);
  }
  ++s.t;
}

}  // namespace detail

/// In-place update with the rule selected by cfg.method.
inline void apply_update(OptimizerState& state, std::span<const double> g, const OptimizerConfig& cfg) {
  detail::check_update_input(state, g, "apply_update");
  switch (cfg.method) {
    case Method::ProxGD: detail::proximal_update(state, g, cfg); break;
    case Method::CMD:
    case Method::QCMD: detail::mirror_update(state, g, cfg); break;
    case Method::RDA:
    case Method::QRDA: detail::dual_averaging_update(state, g, cfg); break;
  }
}

inline OptimizerState qcmd_update(OptimizerState state, std::span<const double> q,
                                  const OptimizerConfig& cfg) {
  detail::check_update_input(state, q, "qcmd_update");
  detail::mirror_update(state, q, cfg);
  return state;
}

inline OptimizerState cmd_update(OptimizerState state, std::span<const double> g,
                                 const OptimizerConfig& cfg) {
  detail::check_update_input(state, g, "cmd_update");
  detail::mirror_update(state, g, cfg);
  return state;
}

inline OptimizerState qrda_update(OptimizerState state, std::span<const double> q,
                                  const OptimizerConfig& cfg) {
  detail::check_update_input(state, q, "qrda_update");
  detail::dual_averaging_update(state, q, cfg);
  return state;
}

inline OptimizerState rda_update(OptimizerState state, std::span<const double> g,
                                 const OptimizerConfig& cfg) {
  detail::check_update_input(state, g, "rda_update");
  detail::dual_averaging_update(state, g, cfg);
  return state;
}

inline OptimizerState proxgd_update(OptimizerState state, std::span<const double> g,
                                    const OptimizerConfig& cfg) {
  detail::check_update_input(state, g, "proxgd_update");
  detail::proximal_update(state, g, cfg);
  return state;
}

/// Local look-ahead parameters x_hat_{t+1} computed from the full-precision
/// local gradient and H_hat = delta + sqrt(sq_accum + g^2). Does not mutate.
inline std::vector<double> tentative_update(const OptimizerState& state, std::span<const double> g,
                                            const OptimizerConfig& cfg) {
  detail::check_update_input(state, g, "tentative_update");
  const auto& a = state.adaptive;
  std::vector<double> x_hat(state.dim());
  const double t_next = static_cast<double>(state.t + 1);
  for (std::size_t i = 0; i < state.dim(); ++i) {
    double h = a.delta + std::sqrt(a.sq_accum[i] + g[i] * g[i]);
    switch (cfg.method) {
      case Method::ProxGD:
        x_hat[i] = kernel::mirror_step(state.x[i], g[i], 1.0, cfg.eta, cfg.lambda);
        break;
      case Method::CMD:
      case Method::QCMD:
        x_hat[i] = kernel::mirror_step(state.x[i], g[i], h, cfg.eta, cfg.lambda);
        break;
      case Method::RDA:
      case Method::QRDA:
        x_hat[i] = kernel::dual_averaging_step(state.grad_sum[i] + g[i], t_next, h, cfg.eta,
                                               cfg.lambda);
        break;
    }
  }
  return x_hat;
}

/// Bit d set iff x_t[d] != 0 or x_hat[d] != 0 (exact comparison).
inline IndicatorBitmap build_indicator(std::span<const double> x, std::span<const double> x_hat) {
  detail::check_same_dim(x.size(), x_hat.size(), "build_indicator");
  IndicatorBitmap bits(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0 || x_hat[i] != 0.0) bits.set(i);
  }
  return bits;
}

inline double l1_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::abs(v);
  return s;
}

inline double sparsity_pct(std::span<const double> x) {
  if (x.empty()) return 0.0;
  std::size_t zeros = 0;
  for (double v : x) zeros += (v == 0.0);
  return 100.0 * static_cast<double>(zeros) / static_cast<double>(x.size());
}

}  // namespace qadagrad

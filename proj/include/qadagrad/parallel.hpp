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
 * \file parallel.hpp
 * \brief Synchronous parameter-server rounds with doubly quantized gradients.
 *
 * One round:
 *   worker m: sample a batch, compute the local gradient g_m, look ahead to
 *             x_hat with it, select I_m = {x != 0 or x_hat != 0}, quantize
 *             g_m restricted to I_m and push the encoded message;
 *   server:   decode all M messages, I_syn = OR of I_m, average the decoded
 *             gradients, quantize the average restricted to I_syn and push
 *             the encoded result to every worker;
 *   worker m: decode q_t and apply the update rule.
 *
 * Quantizers act on the selected sub-vector, so thresholds are computed over
 * the transmitted coordinates only. The Identity quantizer sends the masked
 * gradient as full-precision values and is accounted at 32 d bits.
 *
 * Workers run either inline (sequential mode, the reference) or on their own
 * threads fed through bounded channels. Both modes execute the same worker and
 * server functions with per-(worker, round) seeds and reduce in worker-id
 * order, so their outputs are bitwise identical.
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "qadagrad/channel.hpp"
#include "qadagrad/codec.hpp"
#include "qadagrad/data.hpp"
#include "qadagrad/error.hpp"
#include "qadagrad/optimizer.hpp"
#include "qadagrad/quantize.hpp"
#include "qadagrad/regret.hpp"

namespace qadagrad {

/// Full-precision payload used by the Identity quantizer. The indicator rides
/// along for bookkeeping; the message is billed as 32 d bits.
struct DenseMessage {
  IndicatorBitmap indicator;
  std::vector<double> values;
};

using WirePayload = std::variant<std::vector<std::uint8_t>, DenseMessage>;

inline std::uint64_t wire_bits(const WirePayload& payload, std::size_t dim) {
  if (const auto* dense = std::get_if<DenseMessage>(&payload)) {
    return dense_float_bits(dense->values.size());
  }
  const auto& bytes = std::get<std::vector<std::uint8_t>>(payload);
  auto msg = deserialize(bytes);
  detail::check_same_dim(msg.dim, dim, "wire_bits");
  return payload_bits(msg);
}

struct Decoded {
  std::vector<double> values;
  IndicatorBitmap indicator;
};

inline Decoded decode_payload(const WirePayload& payload, std::size_t dim) {
  Decoded out;
  if (const auto* dense = std::get_if<DenseMessage>(&payload)) {
    detail::check_same_dim(dense->values.size(), dim, "decode_payload");
    out.values = dense->values;
    out.indicator = dense->indicator;
    return out;
  }
  GradientMessage msg = deserialize(std::get<std::vector<std::uint8_t>>(payload));
  detail::check_same_dim(msg.dim, dim, "decode_payload");
  out.values = decode(msg).dense();
  out.indicator = std::move(msg.indicator);
  return out;
}

struct WorkerNode {
  std::size_t id = 0;
  std::vector<std::size_t> shard;
  OptimizerState optimizer;
  std::vector<std::size_t> batch;  // last sampled batch
};

struct ServerNode {
  std::size_t expected_workers = 1;
  std::uint64_t round = 0;
  QuantizerKind quantizer = QuantizerKind::ThresholdExact;
};

/// Shared, read-only round configuration.
struct RoundContext {
  const Dataset* train = nullptr;
  OptimizerConfig optimizer;
  QuantizerKind quantizer = QuantizerKind::ThresholdExact;
  std::size_t batch_per_worker = 20;
  std::uint64_t seed = 1;
  bool bootstrap_full_indicator = true;
  std::vector<double> reference;  // x*, empty when regret is not tracked
};

struct WorkerReport {
  std::size_t worker = 0;
  WirePayload payload;
  // Instrumentation only, never billed: the masked full-precision gradient
  // and batch losses at x_t and x*.
  std::vector<double> masked_gradient;
  double loss = 0.0;
  double reference_loss = 0.0;
};

struct ApplyReport {
  std::size_t worker = 0;
  double loss_next = 0.0;  // f_t(x_{t+1}) on the same batch, when tracked
};

struct RegretSample {
  double objective = 0.0;            // f_t(x_t) + phi(x_t)
  double objective_next = 0.0;       // f_t(x_{t+1}) + phi(x_{t+1})
  double reference_objective = 0.0;  // f_t(x*) + phi(x*)
  double d_inf = 0.0;                // ||x* - x_t||_inf
};

struct RoundMetrics {
  std::uint64_t round = 0;
  double train_loss = 0.0;
  std::uint64_t bits_up = 0;
  std::uint64_t bits_down = 0;
  double mse_error = 0.0;
  double psi_error = 0.0;
  double single_quant_mse = 0.0;
  double sparsity_pct = 0.0;
  std::optional<double> accuracy_pct;
  std::vector<std::size_t> k_up;
  std::size_t k_syn = 0;
  double lemma1_term = 0.0;
  double lemma2_term = 0.0;
  double sum_c = 0.0;
  double g_inf = 0.0;
  double q_inf = 0.0;
  std::optional<RegretSample> regret;
};

namespace detail {

inline std::mt19937_64 round_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t round) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(round),
                    static_cast<std::uint32_t>(round >> 32)};
  return std::mt19937_64(seq);
}

inline constexpr std::uint64_t kServerStream = 0xFFFF0000u;
inline constexpr std::uint64_t kSingleQuantStream = 0xFFFF0001u;

/// Quantize v restricted to `indicator` and encode it. The quantizer sees the
/// selected entries in ascending coordinate order.
template <typename Rng>
WirePayload quantize_selected(QuantizerKind kind, std::span<const double> v,
                              const IndicatorBitmap& indicator, Rng& rng) {
  if (kind == QuantizerKind::Identity) {
    DenseMessage dense{indicator, std::vector<double>(v.size(), 0.0)};
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (indicator.test(i)) dense.values[i] = v[i];
    }
    return dense;
  }
  auto sel = indicator.selected();
  TernaryGradient full(v.size());
  if (!sel.empty()) {
    std::vector<double> sub(sel.size());
    for (std::size_t j = 0; j < sel.size(); ++j) sub[j] = v[sel[j]];
    TernaryGradient q = quantize(kind, sub, rng);
    full.scale = q.scale;
    for (std::size_t j = 0; j < sel.size(); ++j) full.codes[sel[j]] = q.codes[j];
  }
  return serialize(encode(full, indicator));
}

}  // namespace detail

/// Coordinate-wise mean, summed in list order.
inline std::vector<double> averaging(std::span<const std::vector<double>> decoded) {
  if (decoded.empty()) throw Error("averaging needs at least one vector");
  const std::size_t dim = decoded.front().size();
  std::vector<double> out(dim, 0.0);
  for (const auto& v : decoded) {
    detail::check_same_dim(v.size(), dim, "averaging");
    for (std::size_t i = 0; i < dim; ++i) out[i] += v[i];
  }
  const double inv = 1.0 / static_cast<double>(decoded.size());
  for (auto& x : out) x *= inv;
  return out;
}

struct QuantError {
  double mse = 0.0;
  double psi_weighted = 0.0;
};

inline QuantError measure_quant_error(std::span<const double> sync_full, std::span<const double> q,
                                      const AdaptiveState& h) {
  detail::check_same_dim(sync_full.size(), q.size(), "measure_quant_error");
  detail::check_same_dim(sync_full.size(), h.dim(), "measure_quant_error");
  QuantError e;
  for (std::size_t i = 0; i < q.size(); ++i) {
    double d = q[i] - sync_full[i];
    if (d == 0.0) continue;
    e.mse += d * d;
    e.psi_weighted += d * d / h.h(i);
  }
  return e;
}

inline QuantError measure_quant_error(std::span<const double> sync_full, const TernaryGradient& q,
                                      const AdaptiveState& h) {
  auto dense = q.dense();
  return measure_quant_error(sync_full, dense, h);
}

/// Steps 1-3 of a round for one worker.
inline WorkerReport worker_compute(WorkerNode& w, const RoundContext& ctx, std::uint64_t round) {
  const Dataset& data = *ctx.train;
  auto rng = detail::round_rng(ctx.seed, w.id, round);
  std::uniform_int_distribution<std::size_t> pick(0, w.shard.size() - 1);
  w.batch.resize(ctx.batch_per_worker);
  for (auto& b : w.batch) b = w.shard[pick(rng)];

  LossGrad lg = logistic_loss_grad(w.optimizer.x, data, w.batch);
  IndicatorBitmap indicator;
  if (ctx.bootstrap_full_indicator && w.optimizer.t == 0) {
    indicator = IndicatorBitmap::all(data.dim);
  } else {
    auto x_hat = tentative_update(w.optimizer, lg.grad, ctx.optimizer);
    indicator = build_indicator(w.optimizer.x, x_hat);
  }

  WorkerReport report;
  report.worker = w.id;
  report.loss = lg.loss;
  if (!ctx.reference.empty()) report.reference_loss = logistic_loss(ctx.reference, data, w.batch);
  report.masked_gradient.assign(lg.grad.size(), 0.0);
  for (std::size_t i = 0; i < lg.grad.size(); ++i) {
    if (indicator.test(i)) report.masked_gradient[i] = lg.grad[i];
  }
  report.payload = detail::quantize_selected(ctx.quantizer, lg.grad, indicator, rng);
  return report;
}

/// Step 6 for one worker: decode q_t and apply the update.
inline ApplyReport worker_apply(WorkerNode& w, const RoundContext& ctx, const WirePayload& downlink) {
  Decoded q = decode_payload(downlink, ctx.train->dim);
  apply_update(w.optimizer, q.values, ctx.optimizer);
  ApplyReport r;
  r.worker = w.id;
  if (!ctx.reference.empty()) r.loss_next = logistic_loss(w.optimizer.x, *ctx.train, w.batch);
  return r;
}

struct ServerOutput {
  WirePayload downlink;
  std::vector<double> q;          // decoded q_t as the workers will see it
  std::vector<double> sync_full;  // (1/M) sum of masked full-precision gradients
  IndicatorBitmap sync_indicator;
  std::vector<std::size_t> k_up;
  std::uint64_t bits_up = 0;
  std::uint64_t bits_down = 0;
  double single_quant_mse = 0.0;
  std::vector<std::vector<std::uint8_t>> trace;  // uplinks then downlink, ternary only
};

/// Steps 4-5. Reports must be exactly one per worker; they are reduced in
/// worker-id order regardless of arrival order.
inline ServerOutput server_aggregate(ServerNode& server, std::vector<WorkerReport> reports,
                                     const RoundContext& ctx, std::uint64_t round) {
  if (reports.size() != server.expected_workers) {
    throw Error("protocol error: expected " + std::to_string(server.expected_workers) +
                " messages, got " + std::to_string(reports.size()));
  }
  std::sort(reports.begin(), reports.end(),
            [](const WorkerReport& a, const WorkerReport& b) { return a.worker < b.worker; });
  for (std::size_t m = 0; m < reports.size(); ++m) {
    if (reports[m].worker != m) throw Error("protocol error: duplicate or unknown worker id");
  }

  const std::size_t dim = ctx.train->dim;
  const bool keep_trace = ctx.quantizer != QuantizerKind::Identity;
  ServerOutput out;
  out.sync_indicator = IndicatorBitmap(dim);
  std::vector<std::vector<double>> decoded;
  std::vector<std::vector<double>> full;
  decoded.reserve(reports.size());
  full.reserve(reports.size());
  for (auto& r : reports) {
    Decoded d = decode_payload(r.payload, dim);
    out.bits_up += wire_bits(r.payload, dim);
    out.k_up.push_back(d.indicator.popcount());
    out.sync_indicator = indicator_or(out.sync_indicator, d.indicator);
    decoded.push_back(std::move(d.values));
    full.push_back(std::move(r.masked_gradient));
    if (keep_trace) out.trace.push_back(std::get<std::vector<std::uint8_t>>(r.payload));
  }
  std::vector<double> sync_q = averaging(decoded);
  out.sync_full = averaging(full);

  auto rng = detail::round_rng(ctx.seed, detail::kServerStream, round);
  out.downlink = detail::quantize_selected(server.quantizer, sync_q, out.sync_indicator, rng);
  out.q = decode_payload(out.downlink, dim).values;
  out.bits_down = server.expected_workers * wire_bits(out.downlink, dim);
  if (keep_trace) out.trace.push_back(std::get<std::vector<std::uint8_t>>(out.downlink));

  // Reference: quantize the full-precision average once, server side only,
  // keeping the double-precision scale.
  if (server.quantizer != QuantizerKind::Identity) {
    auto single_rng = detail::round_rng(ctx.seed, detail::kSingleQuantStream, round);
    std::vector<double> dense(dim, 0.0);
    auto sel = out.sync_indicator.selected();
    if (!sel.empty()) {
      std::vector<double> sub(sel.size());
      for (std::size_t j = 0; j < sel.size(); ++j) sub[j] = out.sync_full[sel[j]];
      TernaryGradient tq = quantize(server.quantizer, std::span<const double>(sub), single_rng);
      for (std::size_t j = 0; j < sel.size(); ++j) dense[sel[j]] = tq.value(j);
    }
    for (std::size_t i = 0; i < dim; ++i) {
      double d = dense[i] - out.sync_full[i];
      out.single_quant_mse += d * d;
    }
  }
  ++server.round;
  return out;
}

struct EngineConfig {
  OptimizerConfig optimizer;
  QuantizerKind quantizer = QuantizerKind::ThresholdExact;
  std::size_t workers = 2;
  std::size_t batch_per_worker = 20;
  std::uint64_t seed = 1;
  bool bootstrap_full_indicator = true;
  bool threaded = false;
  /// Fail the round if ||q_t||_inf exceeds delta.
  bool strict_delta = false;
  std::vector<double> reference;
  bool record_history = false;
  std::size_t eval_every = 1;
  std::string trace_dir;

  void validate() const {
    optimizer.validate();
    if (workers == 0) throw Error("need at least one worker");
    if (batch_per_worker == 0) throw Error("batch size must be positive");
    if (eval_every == 0) throw Error("eval interval must be positive");
    if (!is_quantized(optimizer.method) && quantizer != QuantizerKind::Identity) {
      throw Error(std::string("method ") + std::string(to_string(optimizer.method)) +
                  " is full precision; quantizer must be identity");
    }
  }
};

/// Contiguous equal shards; the remainder goes to the last worker.
inline std::vector<std::vector<std::size_t>> contiguous_shards(std::size_t n, std::size_t workers) {
  if (workers == 0) throw Error("need at least one worker");
  std::size_t per = n / workers;
  if (per == 0) throw Error("fewer examples than workers");
  std::vector<std::vector<std::size_t>> shards(workers);
  for (std::size_t m = 0; m < workers; ++m) {
    std::size_t begin = m * per;
    std::size_t end = m + 1 == workers ? n : begin + per;
    for (std::size_t i = begin; i < end; ++i) shards[m].push_back(i);
  }
  return shards;
}

class Engine {
 public:
  Engine(const Dataset& train, EngineConfig cfg, const Dataset* test = nullptr)
      : cfg_(std::move(cfg)), test_(test) {
    cfg_.validate();
    if (train.empty()) throw Error("empty training set");
    if (!cfg_.reference.empty()) detail::check_same_dim(cfg_.reference.size(), train.dim, "reference");
    if (test_ && test_->dim > train.dim) throw Error("test set has more features than training set");
    ctx_.train = &train;
    ctx_.optimizer = cfg_.optimizer;
    ctx_.quantizer = cfg_.quantizer;
    ctx_.batch_per_worker = cfg_.batch_per_worker;
    ctx_.seed = cfg_.seed;
    ctx_.bootstrap_full_indicator = cfg_.bootstrap_full_indicator;
    ctx_.reference = cfg_.reference;
    server_.expected_workers = cfg_.workers;
    server_.quantizer = cfg_.quantizer;

    auto shards = contiguous_shards(train.size(), cfg_.workers);
    workers_.resize(cfg_.workers);
    for (std::size_t m = 0; m < cfg_.workers; ++m) {
      workers_[m].id = m;
      workers_[m].shard = std::move(shards[m]);
      workers_[m].optimizer = OptimizerState::zeros(train.dim, cfg_.optimizer.delta);
    }
    history_.delta = cfg_.optimizer.delta;
    history_.eta = cfg_.optimizer.eta;
    history_.reference = cfg_.reference;
    if (!cfg_.trace_dir.empty()) std::filesystem::create_directories(cfg_.trace_dir);
    if (cfg_.threaded) start_threads();
  }

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  ~Engine() { stop_threads(); }

  const EngineConfig& config() const { return cfg_; }
  std::size_t dim() const { return ctx_.train->dim; }
  std::uint64_t rounds_done() const { return server_.round; }
  const OptimizerState& state(std::size_t worker = 0) const { return workers_.at(worker).optimizer; }
  const RegretHistory& history() const { return history_; }

  bool replicas_consistent() const {
    for (const auto& w : workers_) {
      if (!(w.optimizer == workers_.front().optimizer)) return false;
    }
    return true;
  }

  RoundMetrics run_round() {
    const std::uint64_t round = server_.round + 1;
    const auto& state0 = workers_.front().optimizer;
    std::vector<double> x_before = state0.x;
    AdaptiveState h_before = state0.adaptive;

    std::vector<WorkerReport> reports = cfg_.threaded ? gather_compute(round) : sequential_compute(round);
    std::sort(reports.begin(), reports.end(),
              [](const WorkerReport& a, const WorkerReport& b) { return a.worker < b.worker; });
    double loss = 0.0;
    double ref_loss = 0.0;
    for (const auto& r : reports) {
      loss += r.loss;
      ref_loss += r.reference_loss;
    }
    const double inv_m = 1.0 / static_cast<double>(cfg_.workers);

    ServerOutput out = server_aggregate(server_, std::move(reports), ctx_, round);
    std::vector<ApplyReport> acks = cfg_.threaded ? gather_apply(out.downlink) : sequential_apply(out.downlink);

    if (!replicas_consistent()) throw Error("replica divergence after round " + std::to_string(round));
    const auto& state = workers_.front().optimizer;

    RoundMetrics m;
    m.round = round;
    m.train_loss = loss * inv_m;
    m.bits_up = out.bits_up;
    m.bits_down = out.bits_down;
    QuantError qe = measure_quant_error(out.sync_full, out.q, state.adaptive);
    m.mse_error = qe.mse;
    m.psi_error = qe.psi_weighted;
    m.single_quant_mse = out.single_quant_mse;
    m.sparsity_pct = sparsity_pct(state.x);
    m.k_up = out.k_up;
    m.k_syn = out.sync_indicator.popcount();
    m.lemma1_term = 0.5 * dual_norm_sq(out.q, state.adaptive);
    m.lemma2_term = 0.5 * dual_norm_sq(out.q, h_before);
    m.sum_c = accumulated_norm_sum(state.adaptive);
    m.g_inf = accumulated_norm_max(state.adaptive);
    m.q_inf = max_abs(out.q);
    if (cfg_.strict_delta && m.q_inf > cfg_.optimizer.delta) {
      throw Error("strict delta violated: ||q_t||_inf = " + std::to_string(m.q_inf) +
                  " > delta = " + std::to_string(cfg_.optimizer.delta));
    }
    if (test_ && round % cfg_.eval_every == 0) m.accuracy_pct = evaluate(state.x, *test_);

    if (!cfg_.reference.empty()) {
      double loss_next = 0.0;
      for (const auto& a : acks) loss_next += a.loss_next;
      const double lambda = cfg_.optimizer.lambda;
      RegretSample s;
      s.objective = m.train_loss + lambda * l1_norm(x_before);
      s.objective_next = loss_next * inv_m + lambda * l1_norm(state.x);
      s.reference_objective = ref_loss * inv_m + lambda * l1_norm(cfg_.reference);
      s.d_inf = max_abs_diff(cfg_.reference, x_before);
      m.regret = s;
    }
    if (cfg_.record_history) {
      history_.q.push_back(out.q);
      history_.x.push_back(std::move(x_before));
      if (m.regret) {
        history_.objective.push_back(m.regret->objective);
        history_.objective_next.push_back(m.regret->objective_next);
        history_.reference_objective.push_back(m.regret->reference_objective);
      }
    }
    if (!cfg_.trace_dir.empty() && !out.trace.empty()) write_trace(round, out.trace);
    return m;
  }

  /// Accuracy of the current replica on `data` (x_0 = 0 before any round).
  double accuracy(const Dataset& data) const { return evaluate(workers_.front().optimizer.x, data); }

 private:
  struct ComputeCmd {
    std::uint64_t round;
  };
  struct ApplyCmd {
    std::shared_ptr<const WirePayload> downlink;
  };
  using Command = std::variant<ComputeCmd, ApplyCmd>;
  struct Failure {
    std::size_t worker;
    std::string what;
  };
  using Event = std::variant<WorkerReport, ApplyReport, Failure>;

  std::vector<WorkerReport> sequential_compute(std::uint64_t round) {
    std::vector<WorkerReport> reports;
    reports.reserve(workers_.size());
    for (auto& w : workers_) reports.push_back(worker_compute(w, ctx_, round));
    return reports;
  }

  std::vector<ApplyReport> sequential_apply(const WirePayload& downlink) {
    std::vector<ApplyReport> acks;
    for (auto& w : workers_) acks.push_back(worker_apply(w, ctx_, downlink));
    return acks;
  }

  void start_threads() {
    events_ = std::make_unique<Channel<Event>>(cfg_.workers);
    for (std::size_t m = 0; m < cfg_.workers; ++m) {
      inboxes_.push_back(std::make_unique<Channel<Command>>(1));
    }
    for (std::size_t m = 0; m < cfg_.workers; ++m) {
      threads_.emplace_back([this, m] { worker_loop(m); });
    }
  }

  void stop_threads() {
    for (auto& inbox : inboxes_) inbox->close();
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
    threads_.clear();
  }

  void worker_loop(std::size_t m) {
    WorkerNode& w = workers_[m];
    while (auto cmd = inboxes_[m]->receive()) {
      try {
        if (const auto* c = std::get_if<ComputeCmd>(&*cmd)) {
          events_->send(worker_compute(w, ctx_, c->round));
        } else {
          events_->send(worker_apply(w, ctx_, *std::get<ApplyCmd>(*cmd).downlink));
        }
      } catch (const std::exception& e) {
        events_->send(Failure{m, e.what()});
      }
    }
  }

  template <typename T>
  std::vector<T> collect() {
    std::vector<T> out;
    std::optional<Failure> failure;
    for (std::size_t i = 0; i < cfg_.workers; ++i) {
      auto ev = events_->receive();
      if (!ev) throw Error("worker channel closed");
      if (auto* f = std::get_if<Failure>(&*ev)) {
        if (!failure) failure = *f;
        continue;
      }
      out.push_back(std::get<T>(std::move(*ev)));
    }
    if (failure) throw Error("worker " + std::to_string(failure->worker) + ": " + failure->what);
    return out;
  }

  std::vector<WorkerReport> gather_compute(std::uint64_t round) {
    for (auto& inbox : inboxes_) inbox->send(ComputeCmd{round});
    return collect<WorkerReport>();
  }

  std::vector<ApplyReport> gather_apply(const WirePayload& downlink) {
    auto shared = std::make_shared<const WirePayload>(downlink);
    for (auto& inbox : inboxes_) inbox->send(ApplyCmd{shared});
    auto acks = collect<ApplyReport>();
    std::sort(acks.begin(), acks.end(),
              [](const ApplyReport& a, const ApplyReport& b) { return a.worker < b.worker; });
    return acks;
  }

  void write_trace(std::uint64_t round, const std::vector<std::vector<std::uint8_t>>& messages) const {
    char name[32];
    std::snprintf(name, sizeof(name), "round_%06llu.bin", static_cast<unsigned long long>(round));
    std::ofstream out(std::filesystem::path(cfg_.trace_dir) / name, std::ios::binary);
    if (!out) throw Error("cannot write trace in " + cfg_.trace_dir);
    for (const auto& msg : messages) {
      out.write(reinterpret_cast<const char*>(msg.data()), static_cast<std::streamsize>(msg.size()));
    }
  }

  EngineConfig cfg_;
  const Dataset* test_;
  RoundContext ctx_;
  ServerNode server_;
  std::vector<WorkerNode> workers_;
  RegretHistory history_;

  std::unique_ptr<Channel<Event>> events_;
  std::vector<std::unique_ptr<Channel<Command>>> inboxes_;
  std::vector<std::thread> threads_;
};

}  // namespace qadagrad

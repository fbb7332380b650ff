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
 * \file harness.hpp
 * \brief Experiment driver behind the command line tool: training runs with
 * metric streaming, the quantizer optimality check and the trace audit.
 *
 * Metric streams are JSON lines: one {"config": ...} header, one object per
 * round, and a closing {"summary": ...}. The CSV projection carries the same
 * header as a leading "# config: " comment line.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qadagrad/data.hpp"
#include "qadagrad/error.hpp"
#include "qadagrad/optimizer.hpp"
#include "qadagrad/oracle.hpp"
#include "qadagrad/parallel.hpp"
#include "qadagrad/quantize.hpp"
#include "qadagrad/regret.hpp"

namespace qadagrad {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Dataset selection

/// "synth:n=10000,d=1000,k=40,noise=0.1,seed=3,density=0.1,test=2000" or a
/// LIBSVM path. Omitted synthetic keys keep SynthSpec defaults; `test`
/// defaults to a fifth of n.
struct DatasetSpec {
  bool synthetic = false;
  std::string path;
  SynthSpec synth;
  std::size_t synth_test = 0;

  static DatasetSpec parse(std::string_view text) {
    DatasetSpec spec;
    constexpr std::string_view prefix = "synth";
    if (text.substr(0, prefix.size()) != prefix) {
      spec.path = std::string(text);
      return spec;
    }
    spec.synthetic = true;
    std::string_view rest = text.substr(prefix.size());
    if (!rest.empty() && rest.front() == ':') rest.remove_prefix(1);
    bool test_given = false;
    while (!rest.empty()) {
      auto comma = rest.find(',');
      std::string_view item = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      auto eq = item.find('=');
      if (eq == std::string_view::npos) throw Error("bad synthetic spec item: " + std::string(item));
      std::string_view key = item.substr(0, eq);
      std::string_view val = item.substr(eq + 1);
      auto as_size = [&] {
        std::uint64_t v = 0;
        if (!detail::parse_number(val, v)) throw Error("bad value for " + std::string(key));
        return static_cast<std::size_t>(v);
      };
      auto as_real = [&] {
        double v = 0;
        if (!detail::parse_number(val, v)) throw Error("bad value for " + std::string(key));
        return v;
      };
      if (key == "n") spec.synth.n = as_size();
      else if (key == "d") spec.synth.dim = as_size();
      else if (key == "k") spec.synth.k_true = as_size();
      else if (key == "noise") spec.synth.noise = as_real();
      else if (key == "density") spec.synth.density = as_real();
      else if (key == "seed") spec.synth.seed = as_size();
      else if (key == "normalize") spec.synth.normalize = as_size() != 0;
      else if (key == "test") { spec.synth_test = as_size(); test_given = true; }
      else throw Error("unknown synthetic spec key: " + std::string(key));
    }
    if (!test_given) spec.synth_test = spec.synth.n / 5;
    return spec;
  }
};

struct ExperimentData {
  Dataset train;
  std::optional<Dataset> test;
  std::vector<double> x_true;  // synthetic only
};

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  std::string dataset = "synth:n=5000,d=500,k=20,noise=0.1";
  std::string test;  // optional LIBSVM test file
  Method method = Method::QCMD;
  QuantizerKind quantizer = QuantizerKind::ThresholdExact;
  std::size_t workers = 2;
  std::size_t batch_per_worker = 20;
  std::size_t rounds = 500;
  double eta = 0.1;
  double lambda = 1e-4;
  double delta = 1e-8;
  std::uint64_t seed = 1;
  bool strict_qrda_delta = false;
  bool bootstrap = true;
  bool threaded = false;
  std::size_t eval_every = 10;
  bool regret = false;
  std::size_t reference_factor = 10;
  std::string trace_dir;

  void validate() const {
    if (workers == 0) throw Error("workers must be positive");
    if (batch_per_worker == 0) throw Error("batch-per-worker must be positive");
    if (eval_every == 0) throw Error("eval-every must be positive");
    if (regret && reference_factor == 0) throw Error("reference-factor must be positive");
    OptimizerConfig{method, eta, lambda, delta}.validate();
    if (!is_quantized(method) && quantizer != QuantizerKind::Identity) {
      throw Error(std::string("method ") + std::string(to_string(method)) +
                  " is full precision; quantizer must be identity");
    }
  }

  json to_json() const {
    return json{{"dataset", dataset},
                {"test", test},
                {"method", std::string(to_string(method))},
                {"quantizer", std::string(to_string(quantizer))},
                {"workers", workers},
                {"batch_per_worker", batch_per_worker},
                {"rounds", rounds},
                {"eta", eta},
                {"lambda", lambda},
                {"delta", delta},
                {"seed", seed},
                {"strict_qrda_delta", strict_qrda_delta},
                {"bootstrap", bootstrap},
                {"threaded", threaded},
                {"eval_every", eval_every},
                {"regret", regret},
                {"reference_factor", reference_factor},
                {"trace_dir", trace_dir}};
  }
};

inline ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
  ExperimentData out;
  DatasetSpec spec = DatasetSpec::parse(cfg.dataset);
  if (spec.synthetic) {
    SynthSpec s = spec.synth;
    s.n += spec.synth_test;
    SynthResult r = synth_sparse_dataset(s);
    out.x_true = std::move(r.x_true);
    if (spec.synth_test > 0) {
      auto [train, test] = split_tail(std::move(r.data), spec.synth_test);
      out.train = std::move(train);
      out.test = std::move(test);
    } else {
      out.train = std::move(r.data);
    }
  } else {
    out.train = load_libsvm(spec.path);
  }
  if (!cfg.test.empty()) out.test = load_libsvm(cfg.test);
  if (out.test) {
    std::size_t dim = std::max(out.train.dim, out.test->dim);
    out.train.dim = dim;
    out.test->dim = dim;
  }
  return out;
}

/// Delta actually used by a run. Strict mode raises it to a bound on
/// ||q_t||_inf: logistic gradients satisfy |g_i| <= max |z_i|, and neither
/// averaging nor ternary quantization increases the largest magnitude. The
/// margin covers narrowing the scale to float.
inline double effective_delta(const ExperimentConfig& cfg, const Dataset& train) {
  if (!cfg.strict_qrda_delta) return cfg.delta;
  return std::max(cfg.delta, train.max_abs_feature() * (1.0 + 1e-6));
}

inline EngineConfig engine_config(const ExperimentConfig& cfg, const Dataset& train) {
  EngineConfig e;
  e.optimizer = OptimizerConfig{cfg.method, cfg.eta, cfg.lambda, effective_delta(cfg, train)};
  e.quantizer = cfg.quantizer;
  e.workers = cfg.workers;
  e.batch_per_worker = cfg.batch_per_worker;
  e.seed = cfg.seed;
  e.bootstrap_full_indicator = cfg.bootstrap;
  e.threaded = cfg.threaded;
  e.strict_delta = cfg.strict_qrda_delta;
  e.eval_every = cfg.eval_every;
  e.trace_dir = cfg.trace_dir;
  return e;
}

/// x* for regret: final iterate of a full-precision CMD adagrad run
/// reference_factor times longer on the same data, shards and seed.
inline std::vector<double> compute_reference(const ExperimentConfig& cfg, const Dataset& train) {
  ExperimentConfig ref = cfg;
  ref.method = Method::CMD;
  ref.quantizer = QuantizerKind::Identity;
  ref.strict_qrda_delta = false;
  ref.delta = cfg.delta > 0.0 ? cfg.delta : 1e-8;
  EngineConfig e = engine_config(ref, train);
  e.threaded = false;
  e.trace_dir.clear();
  Engine engine(train, e);
  const std::size_t rounds = cfg.rounds * cfg.reference_factor;
  for (std::size_t t = 0; t < rounds; ++t) engine.run_round();
  return engine.state().x;
}

// ---------------------------------------------------------------------------
// Metric output

inline json to_json(const RoundMetrics& m) {
  json j{{"round", m.round},
         {"train_loss", m.train_loss},
         {"bits_up", m.bits_up},
         {"bits_down", m.bits_down},
         {"mse_error", m.mse_error},
         {"psi_error", m.psi_error},
         {"single_quant_mse", m.single_quant_mse},
         {"sparsity_pct", m.sparsity_pct},
         {"k_up", m.k_up},
         {"k_syn", m.k_syn},
         {"lemma1_term", m.lemma1_term},
         {"lemma2_term", m.lemma2_term},
         {"sum_c", m.sum_c},
         {"g_inf", m.g_inf},
         {"q_inf", m.q_inf}};
  if (m.accuracy_pct) j["accuracy_pct"] = *m.accuracy_pct;
  if (m.regret) {
    j["objective"] = m.regret->objective;
    j["objective_next"] = m.regret->objective_next;
    j["reference_objective"] = m.regret->reference_objective;
    j["d_inf"] = m.regret->d_inf;
  }
  return j;
}

struct TrainSummary {
  std::size_t rounds = 0;
  double accuracy_pct = 0.0;
  std::string accuracy_on;
  double sparsity_pct = 0.0;
  std::uint64_t total_bits = 0;
  std::uint64_t total_bits_up = 0;
  double mean_mse_error = 0.0;
  double mean_psi_error = 0.0;
  double final_train_loss = 0.0;

  json to_json() const {
    return json{{"rounds", rounds},
                {"accuracy_pct", accuracy_pct},
                {"accuracy_on", accuracy_on},
                {"sparsity_pct", sparsity_pct},
                {"total_bits", total_bits},
                {"total_bits_up", total_bits_up},
                {"mean_mse_error", mean_mse_error},
                {"mean_psi_error", mean_psi_error},
                {"final_train_loss", final_train_loss}};
  }
};

/// Receives the stream of a training run.
class MetricsSink {
 public:
  virtual ~MetricsSink() = default;
  virtual void header(const json& config) = 0;
  virtual void round(const RoundMetrics& m) = 0;
  virtual void summary(const TrainSummary& s) = 0;
};

class JsonLinesSink : public MetricsSink {
 public:
  explicit JsonLinesSink(std::ostream& out) : out_(out) {}
  void header(const json& config) override { out_ << json{{"config", config}}.dump() << '\n'; }
  void round(const RoundMetrics& m) override { out_ << to_json(m).dump() << '\n'; }
  void summary(const TrainSummary& s) override { out_ << json{{"summary", s.to_json()}}.dump() << '\n'; }

 private:
  std::ostream& out_;
};

class CsvSink : public MetricsSink {
 public:
  explicit CsvSink(std::ostream& out) : out_(out) {}
  void header(const json& config) override {
    out_ << "# config: " << config.dump() << '\n';
    out_ << "round,train_loss,bits_up,bits_down,mse_error,psi_error,sparsity_pct,accuracy_pct,k_syn\n";
  }
  void round(const RoundMetrics& m) override {
    out_ << m.round << ',' << json(m.train_loss).dump() << ',' << m.bits_up << ',' << m.bits_down << ','
         << json(m.mse_error).dump() << ',' << json(m.psi_error).dump() << ','
         << json(m.sparsity_pct).dump() << ',' << (m.accuracy_pct ? json(*m.accuracy_pct).dump() : "")
         << ',' << m.k_syn << '\n';
  }
  void summary(const TrainSummary& s) override { out_ << "# summary: " << s.to_json().dump() << '\n'; }

 private:
  std::ostream& out_;
};

/// Collects everything in memory; used by tests and the acceptance suite.
class RecordingSink : public MetricsSink {
 public:
  void header(const json& config) override { config_ = config; }
  void round(const RoundMetrics& m) override { rounds_.push_back(m); }
  void summary(const TrainSummary& s) override { summary_ = s; }

  const json& config() const { return config_; }
  const std::vector<RoundMetrics>& rounds() const { return rounds_; }
  const TrainSummary& summary() const { return summary_; }

 private:
  json config_;
  std::vector<RoundMetrics> rounds_;
  TrainSummary summary_;
};

/// Forwards to several sinks.
class TeeSink : public MetricsSink {
 public:
  TeeSink(MetricsSink& a, MetricsSink& b) : a_(a), b_(b) {}
  void header(const json& c) override { a_.header(c); b_.header(c); }
  void round(const RoundMetrics& m) override { a_.round(m); b_.round(m); }
  void summary(const TrainSummary& s) override { a_.summary(s); b_.summary(s); }

 private:
  MetricsSink& a_;
  MetricsSink& b_;
};

struct TrainResult {
  TrainSummary summary;
  std::vector<double> x;
  std::vector<double> reference;
};

inline TrainResult run_train(const ExperimentConfig& cfg, const ExperimentData& data, MetricsSink& sink) {
  cfg.validate();
  const Dataset& train = data.train;
  const Dataset* test = data.test ? &*data.test : nullptr;
  EngineConfig ecfg = engine_config(cfg, train);

  TrainResult result;
  if (cfg.regret) {
    result.reference = compute_reference(cfg, train);
    ecfg.reference = result.reference;
  }

  json header = cfg.to_json();
  header["effective_delta"] = ecfg.optimizer.delta;
  header["dim"] = train.dim;
  header["train_examples"] = train.size();
  header["test_examples"] = test ? test->size() : 0;
  header["train_name"] = train.name;
  if (cfg.regret) {
    double n2 = 0.0;
    for (double v : result.reference) n2 += v * v;
    header["reference_norm2_sq"] = n2;
    header["reference_norm_inf"] = max_abs(result.reference);
  }
  sink.header(header);

  Engine engine(train, ecfg, test);
  TrainSummary s;
  double mse_sum = 0.0;
  double psi_sum = 0.0;
  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    RoundMetrics m = engine.run_round();
    if (t == cfg.rounds && test && !m.accuracy_pct) m.accuracy_pct = engine.accuracy(*test);
    s.total_bits += m.bits_up + m.bits_down;
    s.total_bits_up += m.bits_up;
    mse_sum += m.mse_error;
    psi_sum += m.psi_error;
    s.final_train_loss = m.train_loss;
    sink.round(m);
  }
  s.rounds = cfg.rounds;
  if (cfg.rounds > 0) {
    s.mean_mse_error = mse_sum / static_cast<double>(cfg.rounds);
    s.mean_psi_error = psi_sum / static_cast<double>(cfg.rounds);
  }
  s.accuracy_on = test ? "test" : "train";
  s.accuracy_pct = engine.accuracy(test ? *test : train);
  s.sparsity_pct = sparsity_pct(engine.state().x);
  sink.summary(s);
  result.summary = s;
  result.x = engine.state().x;
  return result;
}

// ---------------------------------------------------------------------------
// quantcheck

struct QuantcheckOptions {
  std::size_t min_dim = 1;
  std::size_t max_dim = 12;
  std::size_t trials = 1000;
  std::size_t stochastic_draws = 16;
  std::uint64_t seed = 1;
  double rel_tol = 1e-12;
};

struct QuantcheckReport {
  std::size_t trials = 0;
  std::size_t oracle_violations = 0;
  std::size_t approx_violations = 0;
  std::size_t stochastic_violations = 0;
  std::size_t invariant_violations = 0;  // sign preservation / validity
  double max_oracle_rel_gap = 0.0;       // |exact - oracle| / max(exact, oracle)
  double max_approx_excess = 0.0;        // max (approx - exact) / exact
  double max_stochastic_excess = 0.0;

  bool ok() const {
    return oracle_violations == 0 && approx_violations == 0 && stochastic_violations == 0 &&
           invariant_violations == 0;
  }

  json to_json() const {
    return json{{"trials", trials},
                {"oracle_violations", oracle_violations},
                {"approx_violations", approx_violations},
                {"stochastic_violations", stochastic_violations},
                {"invariant_violations", invariant_violations},
                {"max_oracle_rel_gap", max_oracle_rel_gap},
                {"max_approx_excess", max_approx_excess},
                {"max_stochastic_excess", max_stochastic_excess},
                {"ok", ok()}};
  }
};

/// a and b agree to `rel` relative tolerance; differences below the rounding
/// floor of ||v||^2 also count as agreement.
inline bool close_rel(double a, double b, double rel, double norm_sq) {
  double diff = std::abs(a - b);
  return diff <= rel * std::max(std::abs(a), std::abs(b)) || diff <= 1e-15 * norm_sq;
}

/// exact <= other, up to the same tolerance
inline bool not_worse(double exact, double other, double rel, double norm_sq) {
  return exact <= other || close_rel(exact, other, rel, norm_sq);
}

inline bool sign_preserving(std::span<const double> v, const TernaryGradient& q) {
  if (!q.valid() || q.dim() != v.size()) return false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (q.codes[i] != 0 && q.codes[i] != detail::sign(v[i])) return false;
  }
  return true;
}

/// Checks one vector against the oracle and the other quantizers, folding
/// the outcome into `report`.
template <typename Rng>
void quantcheck_vector(std::span<const double> v, const QuantcheckOptions& opt, Rng& rng,
                       QuantcheckReport& report) {
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  TernaryGradient exact = quantize_threshold_exact(v);
  TernaryGradient approx = quantize_threshold_approx(v);
  double e_exact = quantization_error(v, exact);
  double e_approx = quantization_error(v, approx);
  if (!sign_preserving(v, exact) || !sign_preserving(v, approx)) ++report.invariant_violations;

  if (v.size() <= kOracleMaxDim) {
    OracleResult oracle = oracle_optimal_ternary(v);
    double denom = std::max(e_exact, oracle.error);
    if (denom > 0.0) {
      report.max_oracle_rel_gap = std::max(report.max_oracle_rel_gap, std::abs(e_exact - oracle.error) / denom);
    }
    if (!close_rel(e_exact, oracle.error, opt.rel_tol, norm_sq)) ++report.oracle_violations;
  }
  if (!not_worse(e_exact, e_approx, opt.rel_tol, norm_sq)) ++report.approx_violations;
  if (e_exact > 0.0) report.max_approx_excess = std::max(report.max_approx_excess, (e_approx - e_exact) / e_exact);

  for (std::size_t s = 0; s < opt.stochastic_draws; ++s) {
    TernaryGradient q = quantize_ternary_stochastic(v, rng);
    double e = quantization_error(v, q);
    if (!sign_preserving(v, q)) ++report.invariant_violations;
    if (!not_worse(e_exact, e, opt.rel_tol, norm_sq)) ++report.stochastic_violations;
    if (e_exact > 0.0) report.max_stochastic_excess = std::max(report.max_stochastic_excess, (e - e_exact) / e_exact);
  }
  ++report.trials;
}

inline QuantcheckReport run_quantcheck(const QuantcheckOptions& opt) {
  if (opt.min_dim == 0 || opt.min_dim > opt.max_dim) throw Error("invalid dimension range");
  if (opt.max_dim > kOracleMaxDim) throw Error("oracle comparison needs dims <= " + std::to_string(kOracleMaxDim));
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_dim(opt.min_dim, opt.max_dim);
  QuantcheckReport report;
  std::vector<double> v;
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    v.resize(pick_dim(rng));
    for (auto& x : v) x = gauss(rng);
    quantcheck_vector(v, opt, rng, report);
  }
  return report;
}

// ---------------------------------------------------------------------------
// audit

struct AuditOptions {
  double lemma_rel_tol = 1e-9;
  bool check_bound = true;       // only applied to unbiased-quantizer runs
  bool check_slope = false;
  double slope_min = -0.8;
  double slope_max = -0.3;
  std::size_t slope_first_round = 10;
  std::size_t slope_points = 20;
};

struct AuditReport {
  std::size_t rounds = 0;
  std::size_t lemma1_violations = 0;
  std::size_t lemma2_violations = 0;
  bool lemma2_checked = false;
  double lemma1_lhs = 0.0;
  double lemma2_lhs = 0.0;
  double lemma_rhs = 0.0;
  double max_lemma1_ratio = 0.0;  // max over prefixes of lhs / rhs
  bool has_regret = false;
  double average_regret = 0.0;
  double average_regret_next = 0.0;
  double bound = 0.0;  // theorem bound at T for the run's method
  std::size_t bound_violations = 0;
  bool bound_checked = false;
  std::optional<double> slope;
  std::size_t slope_points_used = 0;
  bool slope_checked = false;
  bool slope_ok = true;

  bool ok() const {
    return lemma1_violations == 0 && lemma2_violations == 0 && bound_violations == 0 && slope_ok;
  }

  json to_json() const {
    json j{{"rounds", rounds},
           {"lemma1_violations", lemma1_violations},
           {"lemma2_checked", lemma2_checked},
           {"lemma2_violations", lemma2_violations},
           {"lemma1_lhs", lemma1_lhs},
           {"lemma2_lhs", lemma2_lhs},
           {"lemma_rhs", lemma_rhs},
           {"max_lemma1_ratio", max_lemma1_ratio},
           {"has_regret", has_regret},
           {"ok", ok()}};
    if (has_regret) {
      j["average_regret"] = average_regret;
      j["average_regret_next"] = average_regret_next;
      j["bound"] = bound;
      j["bound_checked"] = bound_checked;
      j["bound_violations"] = bound_violations;
      j["slope_points_used"] = slope_points_used;
      j["slope_checked"] = slope_checked;
      j["slope_ok"] = slope_ok;
      if (slope) j["slope"] = *slope;
    }
    return j;
  }
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  detail::check_same_dim(x.size(), y.size(), "loglog_slope");
  if (x.size() < 2) throw Error("slope fit needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw Error("slope fit needs distinct abscissae");
  return sxy / sxx;
}

namespace detail {

inline const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error("trace line " + std::to_string(line) + ": missing field '" + key + "'");
  return *it;
}

}  // namespace detail

inline AuditReport audit_trace(std::istream& in, const AuditOptions& opt = {}) {
  std::string line;
  std::size_t lineno = 0;
  std::optional<json> config;
  struct Row {
    double lemma1, lemma2, sum_c, g_inf;
    bool has_regret;
    double objective, objective_next, reference_objective, d_inf;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("trace line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("config")) {
      config = j["config"];
      continue;
    }
    if (j.contains("summary")) continue;
    Row r{};
    r.lemma1 = detail::require(j, "lemma1_term", lineno).get<double>();
    r.lemma2 = detail::require(j, "lemma2_term", lineno).get<double>();
    r.sum_c = detail::require(j, "sum_c", lineno).get<double>();
    r.g_inf = detail::require(j, "g_inf", lineno).get<double>();
    r.has_regret = j.contains("objective");
    if (r.has_regret) {
      r.objective = j["objective"].get<double>();
      r.objective_next = detail::require(j, "objective_next", lineno).get<double>();
      r.reference_objective = detail::require(j, "reference_objective", lineno).get<double>();
      r.d_inf = detail::require(j, "d_inf", lineno).get<double>();
    }
    rows.push_back(r);
  }
  if (!config) throw Error("trace has no config header");
  const json& cfg = *config;
  auto need = [&](const char* key) -> const json& { return detail::require(cfg, key, 1); };

  AuditReport rep;
  rep.rounds = rows.size();
  rep.lemma2_checked = need("strict_qrda_delta").get<bool>();
  const std::size_t dim = need("dim").get<std::size_t>();
  const double eta = need("eta").get<double>();
  const double delta = need("effective_delta").get<double>();
  const Method method = parse_method(need("method").get<std::string>());
  const QuantizerKind quantizer = parse_quantizer(need("quantizer").get<std::string>());

  double lhs1 = 0.0, lhs2 = 0.0;
  for (const auto& r : rows) {
    lhs1 += r.lemma1;
    lhs2 += r.lemma2;
    double tol = opt.lemma_rel_tol * std::max(1.0, r.sum_c);
    if (lhs1 > r.sum_c + tol) ++rep.lemma1_violations;
    if (rep.lemma2_checked && lhs2 > r.sum_c + tol) ++rep.lemma2_violations;
    if (r.sum_c > 0.0) rep.max_lemma1_ratio = std::max(rep.max_lemma1_ratio, lhs1 / r.sum_c);
  }
  rep.lemma1_lhs = lhs1;
  rep.lemma2_lhs = lhs2;
  rep.lemma_rhs = rows.empty() ? 0.0 : rows.back().sum_c;

  rep.has_regret = !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.has_regret; });
  if (!rep.has_regret) return rep;

  const bool dual = is_dual_averaging(method);
  double ref_n2 = cfg.value("reference_norm2_sq", 0.0);
  double ref_inf = cfg.value("reference_norm_inf", 0.0);
  rep.bound_checked = opt.check_bound && quantizer == QuantizerKind::TernaryStochastic;

  double regret_sum = 0.0, regret_next_sum = 0.0, d_inf = 0.0;
  std::vector<double> avg(rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const auto& r = rows[t];
    regret_sum += r.objective - r.reference_objective;
    regret_next_sum += r.objective_next - r.reference_objective;
    d_inf = std::max(d_inf, r.d_inf);
    const std::size_t T = t + 1;
    avg[t] = regret_sum / static_cast<double>(T);
    double bound = dual ? dual_averaging_bound(dim, r.g_inf, delta, eta, ref_n2, ref_inf, T)
                        : mirror_descent_bound(dim, r.g_inf, d_inf, eta, T);
    if (rep.bound_checked && avg[t] > bound) ++rep.bound_violations;
    rep.bound = bound;
  }
  rep.average_regret = avg.back();
  rep.average_regret_next = regret_next_sum / static_cast<double>(rows.size());

  // Log-spaced checkpoints from slope_first_round to T; non-positive averages
  // cannot be placed on a log axis and are skipped.
  if (rows.size() > opt.slope_first_round && opt.slope_points >= 2) {
    std::vector<double> xs, ys;
    double lo = std::log(static_cast<double>(opt.slope_first_round));
    double hi = std::log(static_cast<double>(rows.size()));
    std::size_t last = 0;
    for (std::size_t p = 0; p < opt.slope_points; ++p) {
      double frac = static_cast<double>(p) / static_cast<double>(opt.slope_points - 1);
      auto T = static_cast<std::size_t>(std::llround(std::exp(lo + frac * (hi - lo))));
      T = std::clamp<std::size_t>(T, 1, rows.size());
      if (T == last) continue;
      last = T;
      if (avg[T - 1] > 0.0) {
        xs.push_back(static_cast<double>(T));
        ys.push_back(avg[T - 1]);
      }
    }
    rep.slope_points_used = xs.size();
    if (xs.size() >= 2) rep.slope = loglog_slope(xs, ys);
  }
  if (opt.check_slope) {
    rep.slope_checked = true;
    rep.slope_ok = rep.slope && rep.slope_points_used * 2 >= opt.slope_points && *rep.slope >= opt.slope_min &&
                   *rep.slope <= opt.slope_max;
  }
  return rep;
}

}  // namespace qadagrad

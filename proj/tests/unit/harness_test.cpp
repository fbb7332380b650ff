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

#include <gtest/gtest.h>

#include <sstream>
#include <string>
#include <vector>

#include "qadagrad/harness.hpp"

namespace qadagrad {
namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.dataset = "synth:n=600,d=80,k=6,noise=0.1,density=0.15,seed=3";
  c.rounds = 60;
  c.eta = 0.3;
  c.lambda = 1e-3;
  c.batch_per_worker = 10;
  c.eval_every = 20;
  return c;
}

std::string run_jsonl(const ExperimentConfig& c) {
  ExperimentData data = load_experiment_data(c);
  std::ostringstream out;
  JsonLinesSink sink(out);
  run_train(c, data, sink);
  return out.str();
}

std::vector<json> lines_of(const std::string& s) {
  std::vector<json> out;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

TEST(DatasetSpec, ParsesSyntheticKeys) {
  DatasetSpec s = DatasetSpec::parse("synth:n=100,d=20,k=3,noise=0.5,density=0.3,seed=9,test=7");
  EXPECT_TRUE(s.synthetic);
  EXPECT_EQ(s.synth.n, 100u);
  EXPECT_EQ(s.synth.dim, 20u);
  EXPECT_EQ(s.synth.k_true, 3u);
  EXPECT_EQ(s.synth.noise, 0.5);
  EXPECT_EQ(s.synth.density, 0.3);
  EXPECT_EQ(s.synth.seed, 9u);
  EXPECT_EQ(s.synth_test, 7u);
  EXPECT_EQ(DatasetSpec::parse("synth:n=100").synth_test, 20u);
  EXPECT_FALSE(DatasetSpec::parse("data/train.svm").synthetic);
  EXPECT_THROW(DatasetSpec::parse("synth:n=100,q=3"), Error);
  EXPECT_THROW(DatasetSpec::parse("synth:n=abc"), Error);
}

TEST(Train, SparsityWithRegularizer) {
  ExperimentConfig c = small_config();
  c.rounds = 500;
  c.workers = 2;
  c.lambda = 2e-2;
  RecordingSink sink;
  TrainResult r = run_train(c, load_experiment_data(c), sink);
  EXPECT_GT(r.summary.sparsity_pct, 0.0);
  EXPECT_EQ(sink.rounds().size(), 500u);
}

TEST(Train, IdentityQuantizerMatchesFullPrecision) {
  for (auto [quantized, plain] : {std::pair{Method::QCMD, Method::CMD}, std::pair{Method::QRDA, Method::RDA}}) {
    ExperimentConfig a = small_config();
    a.method = quantized;
    a.quantizer = QuantizerKind::Identity;
    ExperimentConfig b = a;
    b.method = plain;
    auto la = lines_of(run_jsonl(a)), lb = lines_of(run_jsonl(b));
    ASSERT_EQ(la.size(), lb.size());
    for (std::size_t i = 1; i < la.size(); ++i) EXPECT_EQ(la[i], lb[i]) << "line " << i;
  }
}

TEST(Train, ZeroRounds) {
  ExperimentConfig c = small_config();
  c.rounds = 0;
  ExperimentData data = load_experiment_data(c);
  RecordingSink sink;
  TrainResult r = run_train(c, data, sink);
  EXPECT_TRUE(sink.rounds().empty());
  EXPECT_DOUBLE_EQ(r.summary.sparsity_pct, 100.0);
  EXPECT_DOUBLE_EQ(r.summary.accuracy_pct, evaluate(std::vector<double>(data.train.dim, 0.0), *data.test));
  EXPECT_EQ(r.summary.total_bits, 0u);
}

TEST(Train, OutputIsDeterministic) {
  ExperimentConfig c = small_config();
  c.quantizer = QuantizerKind::TernaryStochastic;
  EXPECT_EQ(run_jsonl(c), run_jsonl(c));
  ExperimentConfig t = c;
  t.threaded = true;
  auto a = lines_of(run_jsonl(c)), b = lines_of(run_jsonl(t));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Train, ConfigEchoAndSummaryArithmetic) {
  ExperimentConfig c = small_config();
  auto lines = lines_of(run_jsonl(c));
  ASSERT_GE(lines.size(), 2u);
  const json& cfg = lines.front().at("config");
  EXPECT_EQ(cfg.at("method"), "qcmd");
  EXPECT_EQ(cfg.at("quantizer"), "threshold-exact");
  EXPECT_EQ(cfg.at("rounds"), 60);
  EXPECT_EQ(cfg.at("dim"), 80);
  std::uint64_t total = 0;
  std::size_t evaluated = 0;
  for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
    total += lines[i].at("bits_up").get<std::uint64_t>() + lines[i].at("bits_down").get<std::uint64_t>();
    evaluated += lines[i].contains("accuracy_pct");
  }
  EXPECT_EQ(evaluated, 3u);
  EXPECT_EQ(lines.back().at("summary").at("total_bits").get<std::uint64_t>(), total);
}

TEST(Train, CsvBeginsWithConfig) {
  ExperimentConfig c = small_config();
  c.rounds = 5;
  std::ostringstream out;
  CsvSink sink(out);
  run_train(c, load_experiment_data(c), sink);
  std::istringstream in(out.str());
  std::string first, second;
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(first.rfind("# config: {", 0), 0u);
  EXPECT_EQ(second.rfind("round,", 0), 0u);
}

TEST(Train, InvalidConfigRejected) {
  ExperimentConfig c = small_config();
  c.method = Method::CMD;
  EXPECT_THROW(run_jsonl(c), Error);
  c = small_config();
  c.workers = 0;
  EXPECT_THROW(run_jsonl(c), Error);
  c = small_config();
  c.dataset = "/nonexistent/train.svm";
  EXPECT_THROW(load_experiment_data(c), Error);
}

TEST(Quantcheck, FixedDimension) {
  QuantcheckOptions o;
  o.min_dim = o.max_dim = 8;
  o.trials = 1000;
  QuantcheckReport r = run_quantcheck(o);
  EXPECT_EQ(r.trials, 1000u);
  EXPECT_TRUE(r.ok()) << r.to_json().dump();
}

TEST(Quantcheck, DimensionOne) {
  QuantcheckOptions o;
  o.min_dim = o.max_dim = 1;
  o.trials = 200;
  QuantcheckReport r = run_quantcheck(o);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.max_oracle_rel_gap, 0.0);
}

TEST(Quantcheck, ConstantVectorsHaveNoError) {
  QuantcheckOptions o;
  QuantcheckReport r;
  std::mt19937_64 rng(1);
  for (double c : {0.5, -2.0, 1e-3}) {
    std::vector<double> v(7, c);
    quantcheck_vector(v, o, rng, r);
    EXPECT_EQ(quantization_error(v, quantize_threshold_exact(v)), 0.0);
    EXPECT_EQ(quantization_error(v, quantize_threshold_approx(v)), 0.0);
    EXPECT_EQ(quantization_error(v, quantize_ternary_stochastic(v, rng)), 0.0);
  }
  EXPECT_TRUE(r.ok());
}

TEST(Quantcheck, RejectsOracleOverflow) {
  QuantcheckOptions o;
  o.max_dim = kOracleMaxDim + 1;
  EXPECT_THROW(run_quantcheck(o), Error);
}

TEST(Audit, QcmdTraceSatisfiesLemma) {
  ExperimentConfig c = small_config();
  c.rounds = 200;
  std::istringstream in(run_jsonl(c));
  AuditReport r = audit_trace(in);
  EXPECT_EQ(r.rounds, 200u);
  EXPECT_EQ(r.lemma1_violations, 0u);
  EXPECT_FALSE(r.lemma2_checked);
  EXPECT_LE(r.lemma1_lhs, r.lemma_rhs);
  EXPECT_TRUE(r.ok());
}

TEST(Audit, StrictDeltaChecksSecondLemma) {
  ExperimentConfig c = small_config();
  c.method = Method::QRDA;
  c.rounds = 200;
  c.lambda = 1e-3;
  c.strict_qrda_delta = true;
  std::istringstream in(run_jsonl(c));
  AuditReport r = audit_trace(in);
  EXPECT_TRUE(r.lemma2_checked);
  EXPECT_EQ(r.lemma2_violations, 0u);
  EXPECT_GE(r.lemma2_lhs, r.lemma1_lhs);
}

TEST(Audit, AgreesWithDirectComputation) {
  ExperimentConfig c = small_config();
  c.method = Method::QRDA;
  c.rounds = 80;
  c.regret = true;
  c.reference_factor = 3;
  ExperimentData data = load_experiment_data(c);
  std::ostringstream out;
  JsonLinesSink sink(out);
  TrainResult tr = run_train(c, data, sink);

  EngineConfig e = engine_config(c, data.train);
  e.reference = tr.reference;
  e.record_history = true;
  Engine engine(data.train, e);
  for (std::size_t t = 0; t < c.rounds; ++t) engine.run_round();
  RegretReport direct = regret_diagnostics(engine.history());

  std::istringstream in(out.str());
  AuditReport r = audit_trace(in);
  ASSERT_TRUE(r.has_regret);
  EXPECT_NEAR(r.lemma1_lhs, direct.lemma1_lhs, 1e-9 * direct.lemma1_lhs);
  EXPECT_NEAR(r.lemma2_lhs, direct.lemma2_lhs, 1e-9 * direct.lemma2_lhs);
  EXPECT_NEAR(r.lemma_rhs, direct.lemma_rhs, 1e-9 * direct.lemma_rhs);
  EXPECT_NEAR(r.average_regret, direct.average_regret, 1e-9 * (1 + std::abs(direct.average_regret)));
  EXPECT_NEAR(r.bound, direct.dual_averaging_bound, 1e-9 * direct.dual_averaging_bound);
}

TEST(Audit, ZeroGradientTrace) {
  std::ostringstream t;
  t << json{{"config", {{"strict_qrda_delta", true}, {"dim", 3}, {"eta", 0.1}, {"effective_delta", 1.0},
                        {"method", "qcmd"}, {"quantizer", "ternary"}}}}.dump()
    << '\n';
  for (int i = 1; i <= 5; ++i) {
    t << json{{"round", i}, {"lemma1_term", 0.0}, {"lemma2_term", 0.0}, {"sum_c", 0.0}, {"g_inf", 0.0}}.dump()
      << '\n';
  }
  std::istringstream in(t.str());
  AuditReport r = audit_trace(in);
  EXPECT_EQ(r.rounds, 5u);
  EXPECT_EQ(r.lemma1_lhs, 0.0);
  EXPECT_EQ(r.lemma_rhs, 0.0);
  EXPECT_TRUE(r.ok());
}

TEST(Audit, MissingFieldsAreErrors) {
  std::istringstream no_config(R"({"round":1,"lemma1_term":0,"lemma2_term":0,"sum_c":0,"g_inf":0})");
  EXPECT_THROW(audit_trace(no_config), Error);
  std::istringstream missing(R"({"config":{"strict_qrda_delta":false,"dim":1,"eta":1,"effective_delta":1,"method":"qcmd","quantizer":"ternary"}}
{"round":1,"lemma1_term":0})");
  EXPECT_THROW(audit_trace(missing), Error);
  std::istringstream garbage("not json\n");
  EXPECT_THROW(audit_trace(garbage), Error);
}

TEST(Audit, SlopeFit) {
  std::vector<double> x{1, 10, 100}, y{1, 0.1, 0.01};
  EXPECT_NEAR(loglog_slope(x, y), -1.0, 1e-12);
  std::vector<double> one{1.0};
  EXPECT_THROW(loglog_slope(one, one), Error);
}

}  // namespace
}  // namespace qadagrad

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

#include <filesystem>
#include <fstream>
#include <iterator>
#include <vector>

#include "qadagrad/parallel.hpp"

namespace qadagrad {
namespace {

using Vec = std::vector<double>;

Dataset small_synth(std::size_t n = 400, std::size_t d = 60, double noise = 0.1, std::uint64_t seed = 2) {
  return synth_sparse_dataset({.n = n, .dim = d, .k_true = 6, .noise = noise, .density = 0.15, .seed = seed}).data;
}

EngineConfig engine_cfg(Method m, QuantizerKind q, std::size_t workers, double eta = 0.2, double lambda = 1e-3) {
  EngineConfig c;
  c.optimizer = OptimizerConfig{m, eta, lambda, 1e-6};
  c.quantizer = q;
  c.workers = workers;
  c.batch_per_worker = 10;
  c.seed = 17;
  return c;
}

TEST(Averaging, Examples) {
  std::vector<Vec> two{{1, 0}, {0, 1}};
  EXPECT_EQ(averaging(two), (Vec{0.5, 0.5}));
  std::vector<Vec> same(3, Vec{0.25, -2.0});
  EXPECT_EQ(averaging(same), (Vec{0.25, -2.0}));
  std::vector<Vec> zero(2, Vec(3, 0.0));
  EXPECT_EQ(averaging(zero), Vec(3, 0.0));
  std::vector<Vec> ragged{{1.0}, {1.0, 2.0}};
  EXPECT_THROW(averaging(ragged), Error);
  EXPECT_THROW(averaging(std::vector<Vec>{}), Error);
}

TEST(QuantError, Examples) {
  AdaptiveState h{1.0, {1.0}};  // H = 2
  QuantError e = measure_quant_error(Vec{0.5}, Vec{0.65}, h);
  EXPECT_NEAR(e.mse, 0.0225, 1e-15);
  EXPECT_NEAR(e.psi_weighted, 0.01125, 1e-15);
  QuantError zero = measure_quant_error(Vec{0.3, -1.0}, Vec{0.3, -1.0}, AdaptiveState{1.0, {0.0, 0.0}});
  EXPECT_EQ(zero.mse, 0.0);
  EXPECT_EQ(zero.psi_weighted, 0.0);
}

TEST(Round, SingleWorkerIdentityIsPlainStep) {
  Dataset data = small_synth();
  for (Method m : {Method::CMD, Method::RDA}) {
    RoundContext ctx;
    ctx.train = &data;
    ctx.optimizer = OptimizerConfig{m, 0.3, 1e-3, 1e-6};
    ctx.quantizer = QuantizerKind::Identity;
    ctx.batch_per_worker = 8;
    ServerNode server{1, 0, QuantizerKind::Identity};
    WorkerNode w{0, contiguous_shards(data.size(), 1)[0], OptimizerState::zeros(data.dim, 1e-6), {}};

    for (std::uint64_t round = 1; round <= 3; ++round) {
      OptimizerState before = w.optimizer;
      std::vector<WorkerReport> reports{worker_compute(w, ctx, round)};
      ServerOutput out = server_aggregate(server, std::move(reports), ctx, round);
      worker_apply(w, ctx, out.downlink);

      LossGrad lg = logistic_loss_grad(before.x, data, w.batch);
      OptimizerState expected = m == Method::CMD ? cmd_update(before, lg.grad, ctx.optimizer)
                                                 : rda_update(before, lg.grad, ctx.optimizer);
      if (round == 1) {
        EXPECT_EQ(w.optimizer, expected) << to_string(m);
      } else {
        // Later rounds mask the gradient to the indicator; unselected
        // coordinates stay zero under both rules.
        IndicatorBitmap ind = build_indicator(before.x, tentative_update(before, lg.grad, ctx.optimizer));
        Vec masked(lg.grad.size(), 0.0);
        for (std::size_t i = 0; i < masked.size(); ++i) {
          if (ind.test(i)) masked[i] = lg.grad[i];
        }
        OptimizerState exp2 = m == Method::CMD ? cmd_update(before, masked, ctx.optimizer)
                                               : rda_update(before, masked, ctx.optimizer);
        EXPECT_EQ(w.optimizer.x, exp2.x) << to_string(m);
      }
    }
  }
}

TEST(Round, IdenticalBatchesGiveSharedQuantizedGradient) {
  Dataset data;
  data.dim = 5;
  SparseExample e;
  e.label = 1;
  e.features = {{0, 0.3}, {2, -1.2}, {4, 0.7}};
  data.examples = {e, e};
  RoundContext ctx;
  ctx.train = &data;
  ctx.optimizer = OptimizerConfig{Method::QCMD, 0.1, 0.0, 1e-6};
  ctx.quantizer = QuantizerKind::ThresholdExact;
  ctx.batch_per_worker = 3;
  ServerNode server{2, 0, QuantizerKind::ThresholdExact};
  std::vector<WorkerNode> ws(2);
  for (std::size_t m = 0; m < 2; ++m) {
    ws[m].id = m;
    ws[m].shard = {m};
    ws[m].optimizer = OptimizerState::zeros(5, 1e-6);
  }
  std::vector<WorkerReport> reports;
  for (auto& w : ws) reports.push_back(worker_compute(w, ctx, 1));
  Vec local = decode_payload(reports[0].payload, 5).values;
  EXPECT_EQ(local, decode_payload(reports[1].payload, 5).values);
  ServerOutput out = server_aggregate(server, std::move(reports), ctx, 1);
  EXPECT_EQ(out.q, local);
}

TEST(Round, DenseAverageOfTwoWorkers) {
  Dataset data;
  data.dim = 2;
  data.examples.resize(2);
  RoundContext ctx;
  ctx.train = &data;
  ctx.optimizer = OptimizerConfig{Method::CMD, 0.1, 0.0, 1e-6};
  ctx.quantizer = QuantizerKind::Identity;
  ServerNode server{2, 0, QuantizerKind::Identity};
  auto report = [](std::size_t id, Vec g) {
    WorkerReport r;
    r.worker = id;
    r.masked_gradient = g;
    r.payload = DenseMessage{IndicatorBitmap::all(2), g};
    return r;
  };
  // arrival order does not matter
  std::vector<WorkerReport> reports{report(1, {0, 1}), report(0, {1, 0})};
  ServerOutput out = server_aggregate(server, reports, ctx, 1);
  EXPECT_EQ(out.q, (Vec{0.5, 0.5}));
  EXPECT_EQ(out.bits_up, 2u * 32u * 2u);
  EXPECT_EQ(out.bits_down, 2u * 32u * 2u);

  std::vector<WorkerReport> short_round{report(0, {1, 0})};
  EXPECT_THROW(server_aggregate(server, short_round, ctx, 2), Error);
  std::vector<WorkerReport> duplicate{report(0, {1, 0}), report(0, {0, 1})};
  EXPECT_THROW(server_aggregate(server, duplicate, ctx, 2), Error);
}

TEST(Engine, ReplicasStayConsistent) {
  Dataset data = small_synth();
  for (Method m : {Method::QCMD, Method::QRDA}) {
    for (auto q : {QuantizerKind::TernaryStochastic, QuantizerKind::ThresholdExact, QuantizerKind::ThresholdApprox}) {
      Engine engine(data, engine_cfg(m, q, 3));
      for (int t = 0; t < 40; ++t) engine.run_round();
      EXPECT_TRUE(engine.replicas_consistent());
      EXPECT_EQ(engine.rounds_done(), 40u);
    }
  }
}

TEST(Engine, ThreadedMatchesSequential) {
  Dataset data = small_synth();
  for (auto q : {QuantizerKind::TernaryStochastic, QuantizerKind::ThresholdExact}) {
    EngineConfig seq = engine_cfg(Method::QCMD, q, 4);
    EngineConfig thr = seq;
    thr.threaded = true;
    Engine a(data, seq), b(data, thr);
    for (int t = 0; t < 30; ++t) {
      RoundMetrics ma = a.run_round(), mb = b.run_round();
      EXPECT_EQ(ma.train_loss, mb.train_loss);
      EXPECT_EQ(ma.bits_up, mb.bits_up);
      EXPECT_EQ(ma.k_up, mb.k_up);
      EXPECT_EQ(ma.mse_error, mb.mse_error);
    }
    EXPECT_EQ(a.state(), b.state());
  }
}

TEST(Engine, BitAccounting) {
  Dataset data = small_synth();
  Engine engine(data, engine_cfg(Method::QCMD, QuantizerKind::ThresholdExact, 3));
  for (int t = 0; t < 20; ++t) {
    RoundMetrics m = engine.run_round();
    std::uint64_t up = 0;
    for (std::size_t k : m.k_up) up += payload_bits(data.dim, k);
    EXPECT_EQ(m.bits_up, up);
    EXPECT_EQ(m.bits_down, 3 * payload_bits(data.dim, m.k_syn));
    for (std::size_t k : m.k_up) EXPECT_LE(k, m.k_syn);
    if (t == 0) {
      EXPECT_EQ(m.k_syn, data.dim);
    }
  }
}

TEST(Engine, UnselectedCoordinatesStayZero) {
  Dataset data = small_synth();
  RoundContext ctx;
  ctx.train = &data;
  ctx.optimizer = OptimizerConfig{Method::QCMD, 0.2, 5e-3, 1e-6};
  ctx.quantizer = QuantizerKind::ThresholdExact;
  ctx.batch_per_worker = 10;
  ServerNode server{2, 0, QuantizerKind::ThresholdExact};
  auto shards = contiguous_shards(data.size(), 2);
  std::vector<WorkerNode> ws(2);
  for (std::size_t m = 0; m < 2; ++m) ws[m] = {m, shards[m], OptimizerState::zeros(data.dim, 1e-6), {}};
  for (std::uint64_t round = 1; round <= 30; ++round) {
    Vec before = ws[0].optimizer.x;
    std::vector<WorkerReport> reports;
    for (auto& w : ws) reports.push_back(worker_compute(w, ctx, round));
    ServerOutput out = server_aggregate(server, std::move(reports), ctx, round);
    for (auto& w : ws) worker_apply(w, ctx, out.downlink);
    for (std::size_t i = 0; i < data.dim; ++i) {
      if (!out.sync_indicator.test(i)) {
        EXPECT_EQ(out.q[i], 0.0);
        if (before[i] == 0.0) {
          EXPECT_EQ(ws[0].optimizer.x[i], 0.0);
        }
      }
    }
  }
}

TEST(Engine, IdentityHasNoQuantizationError) {
  Dataset data = small_synth();
  Engine engine(data, engine_cfg(Method::CMD, QuantizerKind::Identity, 2));
  for (int t = 0; t < 20; ++t) {
    RoundMetrics m = engine.run_round();
    EXPECT_EQ(m.mse_error, 0.0);
    EXPECT_EQ(m.psi_error, 0.0);
    EXPECT_EQ(m.bits_up, 2 * dense_float_bits(data.dim));
  }
}

TEST(Engine, DoubleQuantizationNoBetterThanSingleOnAverage) {
  Dataset data = small_synth(800, 120);
  Engine engine(data, engine_cfg(Method::QCMD, QuantizerKind::ThresholdExact, 4));
  double dbl = 0.0, single = 0.0;
  for (int t = 0; t < 100; ++t) {
    RoundMetrics m = engine.run_round();
    dbl += m.mse_error;
    single += m.single_quant_mse;
  }
  EXPECT_GE(dbl, single);
}

TEST(Engine, NoiselessTrainingSeparates) {
  Dataset data = synth_sparse_dataset({.n = 2000, .dim = 50, .k_true = 5, .noise = 0.0, .density = 0.2, .seed = 8}).data;
  EngineConfig c = engine_cfg(Method::CMD, QuantizerKind::Identity, 2, 1.0, 0.0);
  c.batch_per_worker = 50;
  Engine engine(data, c);
  for (int t = 0; t < 1500; ++t) engine.run_round();
  EXPECT_GT(engine.accuracy(data), 99.0);
}

TEST(Engine, DeterministicAcrossInstances) {
  Dataset data = small_synth();
  EngineConfig c = engine_cfg(Method::QRDA, QuantizerKind::TernaryStochastic, 2);
  Engine a(data, c), b(data, c);
  for (int t = 0; t < 25; ++t) {
    a.run_round();
    b.run_round();
  }
  EXPECT_EQ(a.state(), b.state());
}

TEST(Engine, TraceFilesDecode) {
  Dataset data = small_synth();
  auto dir = std::filesystem::temp_directory_path() / "qadagrad_trace_test";
  std::filesystem::remove_all(dir);
  EngineConfig c = engine_cfg(Method::QCMD, QuantizerKind::ThresholdExact, 2);
  c.trace_dir = dir.string();
  Engine engine(data, c);
  std::vector<RoundMetrics> ms;
  for (int t = 0; t < 5; ++t) ms.push_back(engine.run_round());
  for (int t = 0; t < 5; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "round_%06d.bin", t + 1);
    std::ifstream in(dir / name, std::ios::binary);
    ASSERT_TRUE(in) << name;
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::span<const std::uint8_t> rest(bytes);
    std::vector<std::uint64_t> bits;
    while (!rest.empty()) {
      std::size_t n = wire_size(rest);
      bits.push_back(payload_bits(deserialize(rest.subspan(0, n))));
      rest = rest.subspan(n);
    }
    ASSERT_EQ(bits.size(), 3u);
    EXPECT_EQ(bits[0] + bits[1], ms[t].bits_up);
    EXPECT_EQ(2 * bits[2], ms[t].bits_down);
  }
  std::filesystem::remove_all(dir);
}

TEST(Engine, StrictDeltaViolationIsReported) {
  Dataset data = small_synth();
  EngineConfig c = engine_cfg(Method::QRDA, QuantizerKind::ThresholdExact, 2);
  c.strict_delta = true;
  c.optimizer.delta = 1e-9;
  Engine engine(data, c);
  EXPECT_THROW(engine.run_round(), Error);
}

TEST(Engine, ConfigValidation) {
  Dataset data = small_synth();
  EXPECT_THROW(Engine(data, engine_cfg(Method::CMD, QuantizerKind::ThresholdExact, 2)), Error);
  EXPECT_THROW(Engine(data, engine_cfg(Method::QCMD, QuantizerKind::ThresholdExact, 0)), Error);
  EXPECT_THROW(Engine(data, engine_cfg(Method::QCMD, QuantizerKind::ThresholdExact, 1000)), Error);
}

}  // namespace
}  // namespace qadagrad

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

// qadagrad: train | quantcheck | audit | gen-synth
//
// Exit codes: 0 ok, 1 a check reported violations, 2 bad config or data.

#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "qadagrad/qadagrad.hpp"

namespace {

using namespace qadagrad;

int do_train(const ExperimentConfig& cfg, const std::string& out_path, bool csv) {
  ExperimentData data = load_experiment_data(cfg);
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw Error("cannot write " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  std::unique_ptr<MetricsSink> sink;
  if (csv) sink = std::make_unique<CsvSink>(out);
  else sink = std::make_unique<JsonLinesSink>(out);
  run_train(cfg, data, *sink);
  out.flush();
  return out ? 0 : 2;
}

int do_quantcheck(const QuantcheckOptions& opt) {
  QuantcheckReport rep = run_quantcheck(opt);
  std::cout << rep.to_json().dump() << '\n';
  return rep.ok() ? 0 : 1;
}

int do_audit(const std::string& path, const AuditOptions& opt) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  AuditReport rep = audit_trace(in, opt);
  std::cout << rep.to_json().dump() << '\n';
  return rep.ok() ? 0 : 1;
}

int do_gen_synth(const SynthSpec& spec, std::size_t test_count, const std::string& out,
                 const std::string& test_out, const std::string& truth_out) {
  SynthSpec s = spec;
  s.n += test_count;
  SynthResult r = synth_sparse_dataset(s);
  if (test_count > 0) {
    if (test_out.empty()) throw Error("--test given without --test-out");
    auto [train, test] = split_tail(std::move(r.data), test_count);
    save_libsvm(out, train);
    save_libsvm(test_out, test);
  } else {
    save_libsvm(out, r.data);
  }
  if (!truth_out.empty()) {
    std::ofstream t(truth_out);
    t << json{{"dim", spec.dim}, {"x_true", r.x_true}}.dump() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantized adagrad training for sparse linear models"};
  app.require_subcommand(1);

  // train
  ExperimentConfig cfg;
  std::string method = "qcmd";
  std::string quantizer = "threshold-exact";
  bool no_bootstrap = false;
  bool csv = false;
  std::string out_path;
  auto* train = app.add_subcommand("train", "Run the synchronous parallel trainer");
  train->add_option("--dataset", cfg.dataset, "LIBSVM path or synth:n=..,d=..,k=..,noise=..,density=..,seed=..,normalize=0|1,test=..")
      ->capture_default_str();
  train->add_option("--test", cfg.test, "LIBSVM test file");
  train->add_option("--method", method, "proxgd | cmd | rda | qcmd | qrda")->capture_default_str();
  train->add_option("--quantizer", quantizer, "ternary | threshold-exact | threshold-approx | identity")
      ->capture_default_str();
  train->add_option("--workers", cfg.workers)->capture_default_str();
  train->add_option("--batch-per-worker", cfg.batch_per_worker)->capture_default_str();
  train->add_option("--rounds", cfg.rounds)->capture_default_str();
  train->add_option("--eta", cfg.eta)->capture_default_str();
  train->add_option("--lambda", cfg.lambda)->capture_default_str();
  train->add_option("--delta", cfg.delta)->capture_default_str();
  train->add_option("--seed", cfg.seed)->envname("QADAGRAD_SEED")->capture_default_str();
  train->add_flag("--strict-qrda-delta", cfg.strict_qrda_delta,
                  "Raise delta to a bound on ||q_t||_inf and enforce it");
  train->add_flag("--no-bootstrap", no_bootstrap, "Do not send a full indicator in round 1");
  train->add_flag("--threaded", cfg.threaded, "One thread per worker");
  train->add_option("--eval-every", cfg.eval_every)->capture_default_str();
  train->add_flag("--regret", cfg.regret, "Track regret against a long full-precision reference run");
  train->add_option("--reference-factor", cfg.reference_factor)->capture_default_str();
  train->add_option("--trace-dir", cfg.trace_dir, "Dump every wire message per round");
  train->add_flag("--csv", csv, "Emit CSV instead of JSON lines");
  train->add_option("--out", out_path, "Output file (default stdout)");

  // quantcheck
  QuantcheckOptions qopt;
  auto* qc = app.add_subcommand("quantcheck", "Compare the threshold quantizers with the brute-force oracle");
  qc->add_option("--min-dim", qopt.min_dim)->capture_default_str();
  qc->add_option("--max-dim", qopt.max_dim)->capture_default_str();
  qc->add_option("--trials", qopt.trials)->capture_default_str();
  qc->add_option("--stochastic-draws", qopt.stochastic_draws)->capture_default_str();
  qc->add_option("--seed", qopt.seed)->envname("QADAGRAD_SEED")->capture_default_str();
  qc->add_option("--rel-tol", qopt.rel_tol)->capture_default_str();

  // audit
  AuditOptions aopt;
  std::string metrics_path;
  bool no_bound = false;
  auto* audit = app.add_subcommand("audit", "Check lemma inequalities and regret decay on a metrics trace");
  audit->add_option("metrics", metrics_path, "JSON-lines trace written by train")->required();
  audit->add_option("--lemma-tol", aopt.lemma_rel_tol)->capture_default_str();
  audit->add_flag("--no-bound", no_bound, "Skip the regret bound comparison");
  audit->add_flag("--check-slope", aopt.check_slope, "Require the regret slope inside the band");
  audit->add_option("--slope-min", aopt.slope_min)->capture_default_str();
  audit->add_option("--slope-max", aopt.slope_max)->capture_default_str();
  audit->add_option("--slope-first-round", aopt.slope_first_round)->capture_default_str();
  audit->add_option("--slope-points", aopt.slope_points)->capture_default_str();

  // gen-synth
  SynthSpec synth;
  std::size_t synth_test = 0;
  std::string synth_out, synth_test_out, truth_out;
  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic sparse dataset in LIBSVM format");
  gen->add_option("--n", synth.n)->capture_default_str();
  gen->add_option("--d", synth.dim)->capture_default_str();
  gen->add_option("--k", synth.k_true)->capture_default_str();
  gen->add_option("--noise", synth.noise)->capture_default_str();
  gen->add_option("--density", synth.density)->capture_default_str();
  gen->add_flag("--normalize", synth.normalize, "Scale every row to unit L2 norm");
  gen->add_option("--seed", synth.seed)->envname("QADAGRAD_SEED")->capture_default_str();
  gen->add_option("--test", synth_test, "Extra examples written to --test-out");
  gen->add_option("--out", synth_out)->required();
  gen->add_option("--test-out", synth_test_out);
  gen->add_option("--truth-out", truth_out, "JSON file receiving x_true");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      cfg.method = parse_method(method);
      cfg.quantizer = parse_quantizer(quantizer);
      cfg.bootstrap = !no_bootstrap;
      return do_train(cfg, out_path, csv);
    }
    if (*qc) return do_quantcheck(qopt);
    if (*audit) {
      aopt.check_bound = !no_bound;
      return do_audit(metrics_path, aopt);
    }
    if (*gen) return do_gen_synth(synth, synth_test, synth_out, synth_test_out, truth_out);
  } catch (const std::exception& e) {
    std::cerr << "qadagrad: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

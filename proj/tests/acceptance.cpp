// Copyright 2026 The Bundlerec Authors.
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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "bundlerec/experiment.hpp"
#include "bundlerec/hin.hpp"
#include "bundlerec/service.hpp"
#include "bundlerec/training.hpp"
#include "cli_runner.hpp"
#include "fixtures.hpp"
#include "gradcases.hpp"
#include "httplib.h"
#include "oracles.hpp"

using namespace bundlerec;
using model::Strategy;
using model::Variant;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific;
  s.precision(2);
  s << v;
  return s.str();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

// --- gradient integrity ----------------------------------------------------

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  using Case = std::function<nn::GradCheckReport(std::uint64_t)>;
  const std::vector<std::pair<std::string, Case>> cases{
      {"dense_prelu", testing::check_dense_prelu},
      {"softmax_ce", testing::check_softmax_ce},
      {"attention", testing::check_attention_block},
      {"fisr", testing::check_fisr},
      {"hisr_head", testing::check_hisr_head}};
  bool ok = true;
  std::ostringstream detail;
  for (const auto& [name, fn] : cases) {
    double worst = 0;
    int failed = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      auto r = fn(seed);
      worst = std::max(worst, r.max_rel_error);
      if (!r.passed || r.max_rel_error >= 1e-4) ++failed;
    }
    ok = ok && failed == 0;
    detail << name << " max_rel=" << std::scientific << worst << std::defaultfloat
           << (failed ? " (" + std::to_string(failed) + " seeds failed)" : "") << "; ";
  }
  const double secs = seconds_since(t0);
  detail << "20 seeds each, " << fmt(secs, 1) << "s";
  return {ok && secs < 120, detail.str()};
}

// --- attention constraint --------------------------------------------------

Outcome attention_constraint() {
  double worst_sum = 0, worst_perm = 0;
  bool nonneg = true, singleton = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const int d = 8;
    nn::Mlp mlp("att", 4 * d, {80, 40, 1}, true, rng);
    for (int k = 1; k <= 3; ++k) {
      auto sel = testing::random_matrix(d, k, rng, 2.0);
      nn::Vector cand = testing::random_matrix(d, 1, rng, 2.0).col(0);
      auto agg = model::aggregate_selected(Strategy::kAttention, sel, cand, mlp);
      double sum = 0;
      for (double w : agg.weights) {
        nonneg = nonneg && w >= 0.0;
        sum += w;
      }
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      if (k == 1) singleton = singleton && agg.weights == std::vector<double>{1.0};
      std::vector<int> perm(k);
      std::iota(perm.begin(), perm.end(), 0);
      while (std::next_permutation(perm.begin(), perm.end())) {
        nn::Matrix p(d, k);
        for (int i = 0; i < k; ++i) p.col(i) = sel.col(perm[i]);
        auto other = model::aggregate_selected(Strategy::kAttention, p, cand, mlp);
        worst_perm = std::max(worst_perm, (other.v_ss - agg.v_ss).cwiseAbs().maxCoeff());
        for (int i = 0; i < k; ++i) {
          worst_perm = std::max(worst_perm, std::abs(other.weights[i] - agg.weights[perm[i]]));
        }
      }
    }
  }
  const bool ok = nonneg && singleton && worst_sum <= 1e-9 && worst_perm <= 1e-12;
  return {ok, "max |sum-1|=" + sci(worst_sum) +
                  ", permutation gap=" + sci(worst_perm) +
                  ", nonnegative=" + (nonneg ? "yes" : "no") +
                  ", singleton weight 1=" + (singleton ? "yes" : "no")};
}

// --- metric oracle ---------------------------------------------------------

Outcome metric_oracle() {
  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 10);
    std::vector<int> pool(40);
    std::iota(pool.begin(), pool.end(), 0);
    std::shuffle(pool.begin(), pool.end(), rng);
    const int len = static_cast<int>(rng() % (n + 1));
    std::vector<int> rec(pool.begin(), pool.begin() + len);
    std::shuffle(pool.begin(), pool.end(), rng);
    const int n_act = 1 + static_cast<int>(rng() % 8);
    std::vector<int> act(pool.begin(), pool.begin() + n_act);
    worst = std::max(worst, testing::max_metric_gap(eval::metrics_at_n(rec, act, n, n_act),
                                                    testing::metric_oracle(rec, act, n, n_act)));
  }
  auto m = eval::metrics_at_n(std::vector<int>{10, 1, 11, 3}, std::vector<int>{1, 3}, 4, 2);
  const double want[5] = {0.5, 1.0, 0.667, 0.5, 0.651};
  const double got[5] = {m.precision, m.recall, m.f1, m.map, m.ndcg};
  double example_gap = 0;
  for (int i = 0; i < 5; ++i) example_gap = std::max(example_gap, std::abs(got[i] - want[i]));
  return {worst <= 1e-12 && example_gap <= 1e-3,
          "1000 instances max gap=" + sci(worst) + "; worked example (" +
              fmt(got[0], 3) + ", " + fmt(got[1], 3) + ", " + fmt(got[2], 3) + ", " +
              fmt(got[3], 3) + ", " + fmt(got[4], 3) + ")"};
}

// --- walk law --------------------------------------------------------------

Outcome walk_law() {
  const auto t0 = Clock::now();
  auto r = testing::walk_law(testing::walk_toy_graph(), 0.25, 4.0, 50, 500, 17);
  const double secs = seconds_since(t0);
  return {r.transitions >= 100000 && r.max_deviation <= 0.01 && secs < 60,
          std::to_string(r.transitions) + " second-order steps, max deviation " +
              fmt(r.max_deviation, 5) + ", chi2=" + fmt(r.chi_square, 1) + " (dof " +
              std::to_string(r.dof) + "), " + fmt(secs, 1) + "s"};
}

// --- HIN arithmetic --------------------------------------------------------

Outcome hin_arithmetic() {
  bool ok = hin::dice({1, 2, 3}, {2, 3, 4}) == 2.0 / 3.0 &&
            hin::dice({4, 5, 6}, {4, 5, 6}) == 1.0 && hin::dice({1, 2}, {3, 4}) == 0.0;
  const double all_ones = hin::overall_sim({1, 1, 1, 1, 1, 1});
  ok = ok && std::abs(all_ones - 1.0) < 1e-12;
  const std::array<double, 6> expect{0.14, 0.14, 0.27, 0.15, 0.15, 0.15};
  for (int p = 0; p < 6; ++p) ok = ok && hin::kMetaPathWeights[p] == expect[p];

  // Two identical neighbors tie; the smaller index must come first, every time.
  auto repo = corpus::Repository::build(
      {testing::service("sa", "alpha text", {"maps"}, "p1"),
       testing::service("sb", "beta text", {"pay"}, "p1"),
       testing::service("sc", "gamma text", {"chat"}, "p2")},
      {testing::mashup("m1", "first", {"maps"}, {"sa", "sb"}),
       testing::mashup("m2", "second", {"pay"}, {"sb", "sc"}),
       testing::mashup("m3", "third", {"maps"}, {"sa", "sb"})});
  std::vector<int> train{0, 1, 2};
  auto index = hin::HinIndex::build(repo, train, {{1, 2, 3}, {2, 3, 4}, {1, 2, 3}},
                                    {{1, 2, 3}, {3, 4, 5}, {5, 6, 7}});
  hin::TargetState target;
  target.topics = {1, 2, 3};
  target.tags = {"maps"};
  target.selected = {0, 1};
  auto first = hin::find_neighbors(index, target, 3);
  bool deterministic = first.size() == 3 && first[0].mashup == 0 && first[1].mashup == 2 &&
                       first[0].similarity == first[1].similarity;
  for (int rep = 0; rep < 10; ++rep) {
    auto again = hin::find_neighbors(index, target, 3);
    for (std::size_t i = 0; i < again.size(); ++i) {
      deterministic = deterministic && again[i].mashup == first[i].mashup &&
                      again[i].similarity == first[i].similarity;
    }
  }
  return {ok && deterministic,
          "dice 0.6667/1/0 exact, weights match, overall(1..1)=" + fmt(all_ones, 12) +
              ", tie order " + (deterministic ? "stable" : "UNSTABLE")};
}

// --- five-fold experiment -------------------------------------------------

struct Experiment {
  corpus::Repository repo;
  std::vector<corpus::FoldSplit> folds;
  std::map<std::string, eval::Report> nisr;  // by strategy
  eval::Report hisr;
  std::vector<pipeline::ModelBundle> hisr_bundles;
  // Fold 0 pathways, kept for the freeze check.
  std::optional<pipeline::TrainedModel> fisr0, nisr0;
  double seconds = 0;
};

// Fills `e` in place: the fold features keep a pointer to `e.repo`.
void run_experiment(Experiment& e) {
  const auto t0 = Clock::now();
  const std::uint64_t root = 7;
  e.repo = corpus::synth_corpus({});
  e.folds = corpus::make_folds(e.repo, 5, derive_seed(root, "folds"));
  pipeline::PipelineConfig config;
  eval::EvalConfig ec;
  ec.seed = derive_seed(root, "eval");

  std::map<std::string, std::vector<pipeline::ModelBundle>> nisr;
  for (const auto& fold : e.folds) {
    const auto seed = pipeline::fold_seed(root, fold.index);
    auto features = pipeline::FoldFeatures::build(e.repo, fold, config.features, seed);
    pipeline::TrainedModel nisr_attention;
    for (auto s : {Strategy::kAttention, Strategy::kAverage, Strategy::kConcat,
                   Strategy::kNone}) {
      auto m = pipeline::train_separate_model(features, Variant::kNisr, s, config, seed);
      if (s == Strategy::kAttention) nisr_attention = m;
      nisr[model::to_string(s)].push_back({std::move(m), features, config, root});
    }
    auto fisr = pipeline::train_separate_model(features, Variant::kFisr,
                                               Strategy::kAttention, config, seed);
    auto hisr = pipeline::train_hybrid_model(features, fisr, nisr_attention, config, seed);
    if (fold.index == 0) {
      e.fisr0 = fisr;
      e.nisr0 = nisr_attention;
    }
    e.hisr_bundles.push_back({std::move(hisr), features, config, root});
    std::cerr << "  fold " << fold.index << " trained, " << fmt(seconds_since(t0), 0)
              << "s\n";
  }
  for (auto& [name, bundles] : nisr) {
    std::vector<const pipeline::ModelBundle*> ptrs;
    for (const auto& b : bundles) ptrs.push_back(&b);
    e.nisr[name] = eval::run_experiment(ptrs, e.folds, ec);
  }
  std::vector<const pipeline::ModelBundle*> ptrs;
  for (const auto& b : e.hisr_bundles) ptrs.push_back(&b);
  e.hisr = eval::run_experiment(ptrs, e.folds, ec);
  e.seconds = seconds_since(t0);
}

Outcome directional(const Experiment& e) {
  const auto& att = e.nisr.at("attention");
  const auto& none = e.nisr.at("none");
  bool ok = true;
  std::ostringstream d;
  d << "NISR F1@10";
  for (int r : {2, 3}) {
    const auto* a = att.round(r);
    const auto* n = none.round(r);
    const bool here = a && n && a->mean.f1 >= n->mean.f1;
    ok = ok && here;
    d << " round " << r << ": attention " << (a ? fmt(a->mean.f1) : "-") << " vs none "
      << (n ? fmt(n->mean.f1) : "-") << ";";
  }
  bool same_stage1 = true;
  for (const auto& [name, rep] : e.nisr) {
    same_stage1 = same_stage1 && rep.stage1 && att.stage1 &&
                  rep.stage1->precision == att.stage1->precision &&
                  rep.stage1->recall == att.stage1->recall && rep.stage1->f1 == att.stage1->f1 &&
                  rep.stage1->map == att.stage1->map && rep.stage1->ndcg == att.stage1->ndcg;
    // Record-level identity of the round-0 lists, not just the means.
    same_stage1 = same_stage1 && rep.records.size() == att.records.size();
    for (std::size_t i = 0; same_stage1 && i < rep.records.size(); ++i) {
      const auto& x = rep.records[i];
      const auto& y = att.records[i];
      if (x.round != 0) continue;
      same_stage1 = y.round == 0 && x.mashup == y.mashup && x.rec == y.rec;
    }
  }
  d << " stage 1 identical across 4 strategies: " << (same_stage1 ? "yes" : "no");
  d << "; experiment " << fmt(e.seconds, 0) << "s";
  return {ok && same_stage1 && e.seconds < 900, d.str()};
}

Outcome learnability(const Experiment& e) {
  const double f1 = e.hisr.stage2 ? e.hisr.stage2->f1 : 0.0;
  const double rnd = e.hisr.stage2_random_f1;
  return {rnd > 0 && f1 >= 3.0 * rnd,
          "HISR attention stage-2 F1@10 " + fmt(f1) + " vs random " + fmt(rnd) + " (" +
              fmt(rnd > 0 ? f1 / rnd : 0, 2) + "x)"};
}

// --- freeze contract -------------------------------------------------------

// Phase A alone (no fine-tuning) on a HISR network initialized from the
// trained fold-0 FISR and NISR models.
Outcome freeze_contract(const Experiment& e) {
  const auto& features = e.hisr_bundles[0].features;
  auto config = e.hisr_bundles[0].config;
  config.train.finetune_epochs = 0;
  const auto seed = pipeline::fold_seed(7, 0);
  model::NetworkConfig nc = e.hisr_bundles[0].model.warm.config();
  Rng rng(derive_seed(seed, "freeze"));
  model::Network hisr(nc, rng);
  hisr.import_underlying(e.fisr0->warm);
  hisr.import_underlying(e.nisr0->warm);

  corpus::SamplingConfig sc = config.sampling;
  sc.ss_sizes = {1, 2, 3};
  auto samples = corpus::generate_samples(e.repo, e.folds[0], corpus::Purpose::kTrain, sc, seed);
  model::BatchFactory factory = [&](std::span<const corpus::Sample> s) {
    return features.make_batch(s, nc);
  };
  std::vector<nn::Matrix> before;
  for (auto* p : hisr.underlying_params()) before.push_back(p->value);
  auto trace = model::train_hybrid(hisr, samples, factory, config.train, seed);
  bool identical = true;
  auto after = hisr.underlying_params();
  for (std::size_t i = 0; i < after.size(); ++i) {
    identical = identical && after[i]->value.size() == before[i].size() &&
                std::memcmp(after[i]->value.data(), before[i].data(),
                            sizeof(double) * before[i].size()) == 0;
  }
  const auto& loss = trace.phase_a.epoch_loss;
  const bool lower = loss.size() >= 2 && loss.back() < loss.front();
  return {identical && lower,
          std::to_string(after.size()) + " underlying tensors " +
              (identical ? "bit-identical" : "CHANGED") + "; phase-A loss " +
              fmt(loss.front(), 5) + " -> " + fmt(loss.back(), 5) + " over " +
              std::to_string(loss.size()) + " epochs"};
}

// --- reproducibility -------------------------------------------------------

struct PipelineRun {
  bool ok = true;
  std::string failure;
  std::map<std::string, std::string> files;  // checkpoints and reports
};

PipelineRun run_pipeline(const fs::path& dir) {
  PipelineRun run;
  const std::string data = (dir / "data").string(), out = (dir / "out").string();
  const std::string common =
      " --seed 11 --folds 2 --epochs 2 --data-dir " + data + " --out-dir " + out;
  for (const std::string args :
       {"gen-data" + common, "train --variant fisr" + common, "train --variant nisr" + common,
        "train --variant hisr" + common, "evaluate --variant hisr" + common}) {
    auto r = testing::run_cli(args);
    if (r.exit_code != 0) {
      run.ok = false;
      run.failure = args + ": " + r.output;
      return run;
    }
  }
  for (const auto& sub : {dir / "data", dir / "out"}) {
    for (const auto& entry : fs::directory_iterator(sub)) {
      run.files[sub.filename().string() + "/" + entry.path().filename().string()] =
          testing::read_file(entry.path());
    }
  }
  return run;
}

Outcome reproducibility() {
  const auto t0 = Clock::now();
  auto a = run_pipeline(testing::fresh_dir("accept_repro_a"));
  auto b = run_pipeline(testing::fresh_dir("accept_repro_b"));
  if (!a.ok || !b.ok) return {false, "pipeline failed: " + a.failure + b.failure};
  int checkpoints = 0, reports = 0;
  std::vector<std::string> differ;
  for (const auto& [name, bytes] : a.files) {
    auto it = b.files.find(name);
    if (it == b.files.end() || it->second != bytes) differ.push_back(name);
    if (name.ends_with(".ckpt")) ++checkpoints;
    if (name.find("report-") != std::string::npos) ++reports;
  }
  if (a.files.size() != b.files.size()) differ.push_back("(file sets differ)");
  std::string detail = std::to_string(checkpoints) + " checkpoints, " +
                       std::to_string(reports) + " report files, 2 folds x 2 epochs; ";
  detail += differ.empty() ? "all byte-identical" : "differ: " + differ.front();
  detail += ", " + fmt(seconds_since(t0), 0) + "s";
  return {differ.empty() && checkpoints == 6 && reports == 2, detail};
}

// --- session replay --------------------------------------------------------

Outcome session_replay(const Experiment& e) {
  auto dir = testing::fresh_dir("accept_replay");
  corpus::save_repository(e.repo, dir / "data");
  const auto ckpt_path = dir / "hisr.ckpt";
  pipeline::to_checkpoint(e.hisr_bundles[0]).save(ckpt_path);
  auto repo = corpus::load_repository(dir / "data");
  auto model = serve::Recommender::load(repo, ckpt_path);
  const auto log = dir / "sessions.jsonl";

  int lists = 0;
  {
    serve::SessionService svc(10, log);
    svc.set_model(model);
    serve::HttpServer server(svc);
    const int port = server.start("127.0.0.1", 0);
    httplib::Client client("127.0.0.1", port);
    std::mt19937_64 rng(3);
    for (int s = 0; s < 4; ++s) {
      const auto& m = repo.mashup(static_cast<int>(rng() % repo.num_mashups()));
      json req = {{"requirements", m.raw_description}, {"tags", m.tags}};
      auto res = client.Post("/sessions", req.dump(), "application/json");
      if (!res || res->status != 201) return {false, "session creation failed"};
      ++lists;
      auto view = json::parse(res->body);
      const std::string id = view.at("session_id");
      for (int step = 0; step < 4; ++step) {
        if (step == 2) {
          res = client.Post("/sessions/" + id + "/undo", "", "application/json");
        } else {
          const auto pick = view.at("recommendations").at(rng() % 3).at("service_id");
          res = client.Post("/sessions/" + id + "/select",
                            json{{"service_id", pick}}.dump(), "application/json");
        }
        if (!res || res->status != 200) return {false, "session step failed"};
        view = json::parse(res->body);
        ++lists;
      }
    }
    server.stop();
  }
  serve::SessionService fresh(10);
  fresh.set_model(serve::Recommender::load(repo, ckpt_path));
  auto report = fresh.replay(log);
  auto cli = testing::run_cli("serve --replay " + log.string() + " --checkpoint " +
                              ckpt_path.string() + " --data-dir " + (dir / "data").string());
  const bool ok = report.mismatches.empty() && report.events == lists && cli.exit_code == 0;
  return {ok, std::to_string(report.events) + " logged events, " +
                  std::to_string(report.lists_checked) + " lists/attention vectors compared, " +
                  std::to_string(report.mismatches.size()) + " mismatches; CLI replay exit " +
                  std::to_string(cli.exit_code)};
}

}  // namespace

int main() {
  tune_allocator();
  const auto t0 = Clock::now();
  int failed = 0;
  auto report = [&](const std::string& name, const Outcome& o) {
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  };
  auto guarded = [&](const std::string& name, const std::function<Outcome()>& fn) {
    try {
      report(name, fn());
    } catch (const std::exception& ex) {
      report(name, {false, std::string("threw: ") + ex.what()});
    }
  };
  guarded("gradient integrity", gradient_integrity);
  guarded("attention constraint", attention_constraint);
  guarded("metric oracle equivalence", metric_oracle);
  guarded("node2vec walk law", walk_law);
  guarded("HIN arithmetic", hin_arithmetic);

  std::optional<Experiment> experiment;
  try {
    run_experiment(experiment.emplace());
  } catch (const std::exception& ex) {
    experiment.reset();
    const Outcome o{false, std::string("five-fold experiment threw: ") + ex.what()};
    for (const char* name : {"hybrid freeze contract", "directional strategy comparison",
                             "learnability floor", "session replay"}) {
      report(name, o);
    }
  }
  if (experiment) {
    guarded("hybrid freeze contract", [&] { return freeze_contract(*experiment); });
    guarded("directional strategy comparison", [&] { return directional(*experiment); });
    guarded("learnability floor", [&] { return learnability(*experiment); });
  }
  guarded("reproducibility", reproducibility);
  if (experiment) {
    guarded("session replay", [&] { return session_replay(*experiment); });
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << "(" << failed << " failing, "
            << fmt(seconds_since(t0), 0) << "s total)" << std::endl;
  return failed ? 1 : 0;
}

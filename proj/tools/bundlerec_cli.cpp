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

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bundlerec/corpus.hpp"
#include "bundlerec/experiment.hpp"
#include "bundlerec/pipeline.hpp"
#include "bundlerec/service.hpp"

namespace fs = std::filesystem;
using namespace bundlerec;
using nlohmann::json;

namespace {

struct Options {
  std::string data_dir = "data";
  std::string out_dir = "out";
  std::uint64_t seed = 7;
  std::string variant = "hisr";
  std::string strategy = "attention";
  int k_neighbors = 20;
  int epochs = 10;
  double lr = 3e-4;
  int top_n = 10;
  int folds = 5;
  bool dump_config = false;

  // gen-data
  corpus::SynthConfig synth;
  // train
  bool full = false;
  int fold = -1;
  // evaluate
  std::vector<int> rounds{0, 1, 2, 3};
  int draws = 3;
  // sweep-k
  std::vector<int> ks{10, 20, 30, 40, 50};
  // recommend / serve
  std::string checkpoint;
  std::string requirements;
  std::vector<std::string> tags;
  std::vector<std::string> selected;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string log;
  std::string replay;
};

pipeline::PipelineConfig pipeline_config(const Options& o) {
  pipeline::PipelineConfig c;
  c.features.k_neighbors = o.k_neighbors;
  c.train.epochs = o.epochs;
  c.train.lr = o.lr;
  return c;
}

eval::EvalConfig eval_config(const Options& o) {
  eval::EvalConfig c;
  c.rounds = o.rounds;
  c.top_n = o.top_n;
  c.draws = o.draws;
  c.seed = derive_seed(o.seed, "eval");
  return c;
}

json resolved(const std::string& command, const Options& o) {
  const auto e = eval_config(o);
  json j = {{"command", command},
            {"data_dir", o.data_dir},
            {"out_dir", o.out_dir},
            {"seed", o.seed},
            {"variant", o.variant},
            {"strategy", o.strategy},
            {"folds", o.folds},
            {"pipeline", pipeline_config(o).to_json()},
            {"eval",
             {{"rounds", e.rounds},
              {"top_n", e.top_n},
              {"draws", e.draws},
              {"seed", e.seed}}}};
  if (command == "gen-data") {
    j["synth"] = {{"mashups", o.synth.n_mashups},
                  {"services", o.synth.n_services},
                  {"vocab", o.synth.vocab_size},
                  {"tags", o.synth.n_tags},
                  {"providers", o.synth.n_providers}};
  } else if (command == "train") {
    j["full"] = o.full;
    j["fold"] = o.fold;
  } else if (command == "sweep-k") {
    j["ks"] = o.ks;
  } else if (command == "recommend" || command == "serve") {
    j["checkpoint"] = o.checkpoint;
    j["top_n"] = o.top_n;
    if (command == "recommend") {
      j["requirements"] = o.requirements;
      j["tags"] = o.tags;
      j["selected"] = o.selected;
    } else {
      j["host"] = o.host;
      j["port"] = o.port;
      j["log"] = o.log;
      j["replay"] = o.replay;
    }
  }
  return j;
}

std::vector<corpus::FoldSplit> folds_of(const corpus::Repository& repo,
                                        const Options& o) {
  if (o.folds < 2) throw ConfigError("--folds must be >= 2");
  return corpus::make_folds(repo, o.folds, derive_seed(o.seed, "folds"));
}

fs::path checkpoint_path(const Options& o, const std::string& variant,
                         const std::string& suffix) {
  return fs::path(o.out_dir) /
         (variant + "-" + model::to_string(model::parse_strategy(o.strategy)) +
          "-" + suffix + ".ckpt");
}

std::string fold_suffix(int k) { return "fold" + std::to_string(k); }

pipeline::ModelBundle load_bundle(const corpus::Repository& repo,
                                  const fs::path& path) {
  if (!fs::exists(path)) {
    throw Error("missing checkpoint " + path.string());
  }
  return pipeline::from_checkpoint(Checkpoint::load(path), repo);
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

int gen_data(const Options& o) {
  corpus::SynthConfig c = o.synth;
  c.seed = o.seed;
  auto repo = corpus::synth_corpus(c);
  fs::create_directories(o.data_dir);
  corpus::save_repository(repo, o.data_dir);
  std::cout << "wrote " << repo.num_services() << " services and "
            << repo.num_mashups() << " mashups to " << o.data_dir << "\n";
  return 0;
}

int train(const Options& o) {
  const auto repo = corpus::load_repository(o.data_dir);
  const auto variant = model::parse_variant(o.variant);
  const auto strategy = model::parse_strategy(o.strategy);
  const auto config = pipeline_config(o);

  std::vector<std::pair<corpus::FoldSplit, std::string>> jobs;
  if (o.full) {
    jobs.emplace_back(corpus::full_split(repo), "full");
  } else {
    for (const auto& f : folds_of(repo, o)) {
      if (o.fold >= 0 && f.index != o.fold) continue;
      jobs.emplace_back(f, fold_suffix(f.index));
    }
    if (jobs.empty()) throw ConfigError("--fold is out of range");
  }

  // HISR starts from trained FISR and NISR models; check them all up front.
  if (variant == model::Variant::kHisr) {
    for (const auto& [fold, suffix] : jobs) {
      for (const char* base : {"fisr", "nisr"}) {
        auto p = checkpoint_path(o, base, suffix);
        if (!fs::exists(p)) {
          throw Error(
              "HISR training starts from trained FISR and NISR models of the "
              "same fold and strategy; missing " + p.string() +
              " (run `train --variant " + base + "` first)");
        }
      }
    }
  }

  fs::create_directories(o.out_dir);
  for (const auto& [fold, suffix] : jobs) {
    const auto seed = pipeline::fold_seed(o.seed, fold.index);
    pipeline::ModelBundle bundle;
    bundle.config = config;
    bundle.seed = o.seed;
    if (variant == model::Variant::kHisr) {
      auto fisr = load_bundle(repo, checkpoint_path(o, "fisr", suffix));
      auto nisr = load_bundle(repo, checkpoint_path(o, "nisr", suffix));
      if (fisr.features.fingerprint() != nisr.features.fingerprint()) {
        throw IntegrityError("FISR and NISR checkpoints of " + suffix +
                             " were built from different features");
      }
      bundle.features = fisr.features.with_neighbors(config.features.k_neighbors);
      bundle.model = pipeline::train_hybrid_model(bundle.features, fisr.model,
                                                  nisr.model, config, seed);
    } else {
      bundle.features =
          pipeline::FoldFeatures::build(repo, fold, config.features, seed);
      bundle.model = pipeline::train_separate_model(bundle.features, variant,
                                                    strategy, config, seed);
    }
    auto path = checkpoint_path(o, o.variant, suffix);
    auto ckpt = pipeline::to_checkpoint(bundle);
    ckpt.save(path);
    std::cout << path.string() << " " << hex64(ckpt.hash()) << "\n";
  }
  return 0;
}

void write_report(const Options& o, const eval::Report& report,
                  const std::string& stem) {
  std::ostringstream tsv;
  report.write_tsv(tsv);
  write_file(fs::path(o.out_dir) / (stem + ".tsv"), tsv.str());
  write_file(fs::path(o.out_dir) / (stem + ".json"),
             report.to_json().dump(2) + "\n");
  std::cout << tsv.str();
}

int evaluate(const Options& o) {
  const auto repo = corpus::load_repository(o.data_dir);
  const auto folds = folds_of(repo, o);
  std::vector<pipeline::ModelBundle> bundles;
  for (const auto& f : folds) {
    bundles.push_back(
        load_bundle(repo, checkpoint_path(o, o.variant, fold_suffix(f.index))));
  }
  std::vector<const pipeline::ModelBundle*> ptrs;
  for (const auto& b : bundles) ptrs.push_back(&b);
  auto report = eval::run_experiment(ptrs, folds, eval_config(o));
  write_report(o, report, "report-" + o.variant + "-" +
                              model::to_string(model::parse_strategy(o.strategy)));
  return 0;
}

int sweep_k(const Options& o) {
  const auto repo = corpus::load_repository(o.data_dir);
  const auto folds = folds_of(repo, o);
  const auto variant = model::parse_variant(o.variant);
  std::vector<pipeline::ModelBundle> fisr;
  if (variant == model::Variant::kHisr) {
    for (const auto& f : folds) {
      fisr.push_back(
          load_bundle(repo, checkpoint_path(o, "fisr", fold_suffix(f.index))));
    }
  }
  std::vector<const pipeline::ModelBundle*> ptrs;
  for (const auto& b : fisr) ptrs.push_back(&b);
  auto points = eval::k_sweep(repo, folds, variant,
                              model::parse_strategy(o.strategy), o.ks,
                              pipeline_config(o), o.seed, eval_config(o), ptrs);
  std::ostringstream tsv;
  tsv << "k\tstage\tP@N\tR@N\tF1@N\tMAP@N\tNDCG@N\n";
  json j = json::array();
  for (const auto& p : points) {
    for (const auto& [label, m] :
         {std::pair{"stage1", p.report.stage1}, std::pair{"stage2", p.report.stage2}}) {
      if (!m) continue;
      tsv << p.k << '\t' << label << '\t' << m->precision << '\t' << m->recall
          << '\t' << m->f1 << '\t' << m->map << '\t' << m->ndcg << '\n';
    }
    j.push_back({{"k", p.k}, {"report", p.report.to_json(false)}});
  }
  const std::string stem =
      "sweep-" + o.variant + "-" + model::to_string(model::parse_strategy(o.strategy));
  write_file(fs::path(o.out_dir) / (stem + ".tsv"), tsv.str());
  write_file(fs::path(o.out_dir) / (stem + ".json"), j.dump(2) + "\n");
  std::cout << tsv.str();
  return 0;
}

fs::path serving_checkpoint(const Options& o) {
  return o.checkpoint.empty() ? checkpoint_path(o, o.variant, "full")
                              : fs::path(o.checkpoint);
}

int recommend(const Options& o) {
  const auto repo = corpus::load_repository(o.data_dir);
  std::ifstream in(o.requirements);
  if (!in) throw Error("cannot read requirements file " + o.requirements);
  std::stringstream text;
  text << in.rdbuf();
  auto tokens = corpus::tokenize(text.str());
  if (tokens.empty()) throw ConfigError("requirements text has no words");
  const auto path = serving_checkpoint(o);
  if (!fs::exists(path)) throw Error("missing checkpoint " + path.string());
  auto model = serve::Recommender::load(repo, path);
  std::vector<int> selected;
  for (const auto& id : o.selected) {
    auto idx = repo.service_index(id);
    if (!idx) throw ConfigError("unknown service " + id);
    selected.push_back(*idx);
  }
  auto ranking = model->recommend(tokens, corpus::normalize_tags(o.tags),
                                  selected, o.top_n);
  json recs = json::array();
  for (const auto& item : ranking.items) {
    recs.push_back({{"service_id", repo.service(item.service).id},
                    {"name", repo.service(item.service).name},
                    {"score", item.score}});
  }
  json attention = json::array();
  for (std::size_t i = 0; i < ranking.attention.size(); ++i) {
    attention.push_back(
        {{"selected_id", o.selected[i]}, {"weight", ranking.attention[i]}});
  }
  std::cout << json{{"recommendations", recs}, {"attention", attention}}.dump(2)
            << "\n";
  return 0;
}

serve::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const Options& o) {
  const auto repo = corpus::load_repository(o.data_dir);
  const auto path = serving_checkpoint(o);
  if (!fs::exists(path)) throw Error("missing checkpoint " + path.string());
  std::optional<fs::path> log;
  if (!o.log.empty()) log = o.log;
  serve::SessionService service(o.top_n, o.replay.empty() ? log : std::nullopt);
  service.set_model(serve::Recommender::load(repo, path));
  if (!o.replay.empty()) {
    auto report = service.replay(o.replay);
    std::cout << "replayed " << report.events << " events, "
              << report.lists_checked << " lists, " << report.mismatches.size()
              << " mismatches\n";
    for (const auto& m : report.mismatches) std::cout << "  " << m << "\n";
    return report.mismatches.empty() ? 0 : 1;
  }
  serve::HttpServer server(service);
  const int port = server.start(o.host, o.port);
  std::cout << "listening on http://" << o.host << ":" << port << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.wait();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Multi-round service bundle recommendation"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--data-dir", o.data_dir, "Corpus directory")
        ->capture_default_str();
    sub->add_option("--out-dir", o.out_dir, "Checkpoint and report directory")
        ->capture_default_str();
    sub->add_option("--seed", o.seed, "Root seed")->capture_default_str();
    sub->add_option("--variant", o.variant, "fisr, nisr or hisr")
        ->check(CLI::IsMember({"fisr", "nisr", "hisr"}))
        ->capture_default_str();
    sub->add_option("--strategy", o.strategy,
                    "attention, average, concat or none")
        ->check(CLI::IsMember({"attention", "average", "concat", "concatenation",
                               "none"}))
        ->capture_default_str();
    sub->add_option("--k-neighbors", o.k_neighbors, "Neighbor mashups")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--epochs", o.epochs, "Training epochs")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--lr", o.lr, "Learning rate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--top-n", o.top_n, "List length")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--folds", o.folds, "Cross-validation folds")
        ->capture_default_str();
    sub->add_flag("--dump-config", o.dump_config,
                  "Print the resolved configuration and exit");
  };

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic corpus");
  common(gen);
  gen->add_option("--mashups", o.synth.n_mashups)->capture_default_str();
  gen->add_option("--services", o.synth.n_services)->capture_default_str();
  gen->add_option("--vocab", o.synth.vocab_size)->capture_default_str();
  gen->add_option("--tags", o.synth.n_tags)->capture_default_str();
  gen->add_option("--providers", o.synth.n_providers)->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train one variant on every fold");
  common(tr);
  tr->add_flag("--full", o.full, "Train once on all mashups for serving");
  tr->add_option("--fold", o.fold, "Train only this fold");

  auto* ev = app.add_subcommand("evaluate", "Multi-round evaluation report");
  common(ev);
  ev->add_option("--rounds", o.rounds, "Rounds to evaluate")
      ->delimiter(',')
      ->capture_default_str();
  ev->add_option("--draws", o.draws, "Selection draws per round")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* sw = app.add_subcommand("sweep-k", "Neighbor count sweep");
  common(sw);
  sw->add_option("--ks", o.ks, "Neighbor counts")->delimiter(',')
      ->capture_default_str();
  sw->add_option("--rounds", o.rounds)->delimiter(',')->capture_default_str();
  sw->add_option("--draws", o.draws)->capture_default_str();

  auto* rec = app.add_subcommand("recommend", "Rank services for requirements");
  common(rec);
  rec->add_option("--checkpoint", o.checkpoint,
                  "Model checkpoint (default <out-dir>/<variant>-<strategy>-full.ckpt)");
  rec->add_option("--requirements", o.requirements, "Requirements text file")
      ->required();
  rec->add_option("--tags", o.tags)->delimiter(',');
  rec->add_option("--selected", o.selected, "Selected service ids in order")
      ->delimiter(',');

  auto* sv = app.add_subcommand("serve", "HTTP session service");
  common(sv);
  sv->add_option("--checkpoint", o.checkpoint);
  sv->add_option("--host", o.host)->capture_default_str();
  sv->add_option("--port", o.port)->capture_default_str();
  sv->add_option("--log", o.log, "Append-only session log");
  sv->add_option("--replay", o.replay, "Replay a session log and exit");

  CLI11_PARSE(app, argc, argv);

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  if (o.dump_config) {
    std::cout << resolved(name, o).dump(2) << "\n";
    return 0;
  }
  try {
    if (name == "gen-data") return gen_data(o);
    if (name == "train") return train(o);
    if (name == "evaluate") return evaluate(o);
    if (name == "sweep-k") return sweep_k(o);
    if (name == "recommend") return recommend(o);
    return run_serve(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

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

#include "bundlerec/experiment.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

namespace bundlerec::eval {

const RoundSummary* Report::round(int r) const {
  for (const auto& s : rounds) {
    if (s.round == r) return &s;
  }
  return nullptr;
}

nlohmann::json Report::to_json(bool with_records) const {
  nlohmann::json j = {{"variant", variant},
                      {"strategy", strategy},
                      {"top_n", top_n}};
  nlohmann::json rj = nlohmann::json::array();
  for (const auto& r : rounds) {
    rj.push_back({{"round", r.round},
                  {"records", r.records},
                  {"metrics", eval::to_json(r.mean)},
                  {"random_f1", r.random_f1}});
  }
  j["rounds"] = rj;
  j["stage1"] = stage1 ? eval::to_json(*stage1) : nlohmann::json();
  j["stage2"] = stage2 ? eval::to_json(*stage2) : nlohmann::json();
  j["stage2_random_f1"] = stage2_random_f1;
  if (with_records) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : records) {
      recs.push_back({{"fold", r.fold},
                      {"mashup", r.mashup},
                      {"round", r.round},
                      {"draw", r.draw},
                      {"selected", r.selected},
                      {"rec", r.rec},
                      {"act", r.act},
                      {"pool", r.pool},
                      {"metrics", eval::to_json(r.metrics)},
                      {"random_f1", r.random_f1}});
    }
    j["records"] = recs;
  }
  return j;
}

namespace {

void tsv_row(std::ostream& out, const Report& r, const std::string& label,
             int count, const Metrics& m, double rnd) {
  out << r.variant << '\t' << r.strategy << '\t' << label << '\t' << count
      << '\t' << m.precision << '\t' << m.recall << '\t' << m.f1 << '\t'
      << m.map << '\t' << m.ndcg << '\t' << rnd << '\n';
}

}  // namespace

void Report::write_tsv(std::ostream& out, bool header) const {
  const std::string n = std::to_string(top_n);
  if (header) {
    out << "variant\tstrategy\tround\trecords\tP@" << n << "\tR@" << n
        << "\tF1@" << n << "\tMAP@" << n << "\tNDCG@" << n
        << "\trandom_F1@" << n << '\n';
  }
  out.precision(6);
  for (const auto& r : rounds) {
    tsv_row(out, *this, std::to_string(r.round), r.records, r.mean,
            r.random_f1);
  }
  if (stage1) {
    const auto* r0 = round(0);
    tsv_row(out, *this, "stage1", r0->records, *stage1, r0->random_f1);
  }
  if (stage2) {
    int count = 0;
    for (const auto& r : rounds) {
      if (r.round > 0) count += r.records;
    }
    tsv_row(out, *this, "stage2", count, *stage2, stage2_random_f1);
  }
}

std::vector<int> round_selection(const corpus::Repository& repo, int mashup,
                                 int fold, int round, int draw,
                                 std::uint64_t seed) {
  const auto& comps = repo.mashup(mashup).components;
  if (round < 0 || round >= static_cast<int>(comps.size())) {
    throw ConfigError("round " + std::to_string(round) +
                      " is not admissible for mashup " + repo.mashup(mashup).id);
  }
  Rng rng(derive_seed(seed, "rounds/" + std::to_string(fold) + "/" +
                                repo.mashup(mashup).id + "/" +
                                std::to_string(round) + "/" +
                                std::to_string(draw)));
  std::vector<int> sorted = comps;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> chosen;
  std::sample(sorted.begin(), sorted.end(), std::back_inserter(chosen), round,
              rng);
  std::shuffle(chosen.begin(), chosen.end(), rng);
  return chosen;
}

std::vector<EvalRecord> evaluate_fold(const pipeline::ModelBundle& bundle,
                                      const corpus::FoldSplit& fold,
                                      const EvalConfig& config) {
  const auto& features = bundle.features;
  const auto& repo = features.repo();
  if (features.fold_index() != fold.index) {
    throw IntegrityError("model was trained for fold " +
                         std::to_string(features.fold_index()) +
                         ", evaluating fold " + std::to_string(fold.index));
  }
  std::vector<int> train = fold.train;
  std::sort(train.begin(), train.end());
  if (train != features.train_mashups()) {
    throw IntegrityError("fold " + std::to_string(fold.index) +
                         " training mashups differ from the model's");
  }
  if (config.top_n < 1 || config.draws < 1) {
    throw ConfigError("top-n and draws must be >= 1");
  }
  pipeline::Scorer warm(bundle.model.warm, features);
  pipeline::Scorer cold(bundle.model.cold, features);
  std::vector<int> test = fold.test;
  std::sort(test.begin(), test.end());
  std::vector<EvalRecord> records;
  for (int m : test) {
    const auto& comps = repo.mashup(m).components;
    for (int r : config.rounds) {
      if (r < 0 || r > 3) throw ConfigError("rounds must lie in 0..3");
      if (r > static_cast<int>(comps.size()) - 1) continue;
      const int draws = r == 0 ? 1 : config.draws;
      for (int d = 0; d < draws; ++d) {
        auto selected = round_selection(repo, m, fold.index, r, d, config.seed);
        auto pool = pipeline::candidate_pool(repo.num_services(), selected);
        const auto& scorer = r == 0 ? cold : warm;
        auto ranking =
            scorer.rank(scorer.mashup_query(m, selected), pool, config.top_n);
        std::vector<int> act;
        for (int s : comps) {
          if (std::find(selected.begin(), selected.end(), s) == selected.end()) {
            act.push_back(s);
          }
        }
        if (act.empty()) {
          warn("mashup " + repo.mashup(m).id + " has nothing left to predict");
          continue;
        }
        std::vector<int> rec;
        for (const auto& item : ranking.items) rec.push_back(item.service);
        EvalRecord rec_out;
        rec_out.fold = fold.index;
        rec_out.mashup = repo.mashup(m).id;
        rec_out.round = r;
        rec_out.draw = d;
        for (int s : selected) rec_out.selected.push_back(repo.service(s).id);
        for (int s : rec) rec_out.rec.push_back(repo.service(s).id);
        for (int s : act) rec_out.act.push_back(repo.service(s).id);
        rec_out.pool = static_cast<int>(pool.size());
        rec_out.metrics = metrics_at_n(rec, act, config.top_n,
                                       static_cast<int>(act.size()));
        rec_out.random_f1 = random_f1(rec_out.pool,
                                      static_cast<int>(act.size()),
                                      config.top_n);
        records.push_back(std::move(rec_out));
      }
    }
  }
  return records;
}

Report summarize(const std::string& variant, const std::string& strategy,
                 int top_n, std::vector<EvalRecord> records) {
  Report rep;
  rep.variant = variant;
  rep.strategy = strategy;
  rep.top_n = top_n;
  std::map<int, RoundSummary> by_round;
  for (const auto& r : records) {
    auto& s = by_round[r.round];
    s.round = r.round;
    ++s.records;
    s.mean += r.metrics;
    s.random_f1 += r.random_f1;
  }
  Metrics stage2;
  double stage2_random = 0;
  int stage2_rounds = 0;
  for (auto& [round, s] : by_round) {
    s.mean = s.mean / s.records;
    s.random_f1 /= s.records;
    rep.rounds.push_back(s);
    if (round == 0) {
      rep.stage1 = s.mean;
    } else {
      stage2 += s.mean;
      stage2_random += s.random_f1;
      ++stage2_rounds;
    }
  }
  if (stage2_rounds > 0) {
    rep.stage2 = stage2 / stage2_rounds;
    rep.stage2_random_f1 = stage2_random / stage2_rounds;
  }
  rep.records = std::move(records);
  return rep;
}

Report run_experiment(const std::vector<const pipeline::ModelBundle*>& models,
                      const std::vector<corpus::FoldSplit>& folds,
                      const EvalConfig& config) {
  if (models.size() != folds.size() || models.empty()) {
    throw ConfigError("need exactly one trained model per fold");
  }
  std::vector<EvalRecord> all;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (!models[i]) {
      throw ConfigError("missing model for fold " + std::to_string(i));
    }
    if (models[i]->model.variant != models[0]->model.variant ||
        models[i]->model.strategy != models[0]->model.strategy) {
      throw ConfigError("fold models disagree on variant or strategy");
    }
    auto recs = evaluate_fold(*models[i], folds[i], config);
    all.insert(all.end(), recs.begin(), recs.end());
  }
  return summarize(model::to_string(models[0]->model.variant),
                   model::to_string(models[0]->model.strategy), config.top_n,
                   std::move(all));
}

double metric_value(const Metrics& m, const std::string& name) {
  if (name == "P") return m.precision;
  if (name == "R") return m.recall;
  if (name == "F1") return m.f1;
  if (name == "MAP") return m.map;
  if (name == "NDCG") return m.ndcg;
  throw ConfigError("unknown metric " + name);
}

std::pair<std::vector<double>, std::vector<double>> paired_values(
    const Report& a, const Report& b, const std::string& metric,
    int min_round) {
  using Key = std::tuple<int, std::string, int, int>;
  std::map<Key, double> other;
  for (const auto& r : b.records) {
    if (r.round >= min_round) {
      other[{r.fold, r.mashup, r.round, r.draw}] = metric_value(r.metrics, metric);
    }
  }
  std::pair<std::vector<double>, std::vector<double>> out;
  for (const auto& r : a.records) {
    if (r.round < min_round) continue;
    auto it = other.find({r.fold, r.mashup, r.round, r.draw});
    if (it == other.end()) continue;
    out.first.push_back(metric_value(r.metrics, metric));
    out.second.push_back(it->second);
  }
  return out;
}

std::vector<SweepPoint> k_sweep(
    const corpus::Repository& repo, const std::vector<corpus::FoldSplit>& folds,
    model::Variant variant, model::Strategy strategy,
    const std::vector<int>& ks, const pipeline::PipelineConfig& config,
    std::uint64_t root_seed, const EvalConfig& eval,
    const std::vector<const pipeline::ModelBundle*>& fisr) {
  if (variant == model::Variant::kFisr) {
    throw ConfigError("the neighbor count does not affect FISR");
  }
  if (variant == model::Variant::kHisr && fisr.size() != folds.size()) {
    throw ConfigError("HISR sweep needs a trained FISR model per fold");
  }
  std::vector<pipeline::FoldFeatures> base;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (variant == model::Variant::kHisr) {
      base.push_back(fisr[i]->features);
    } else {
      base.push_back(pipeline::FoldFeatures::build(
          repo, folds[i], config.features,
          pipeline::fold_seed(root_seed, folds[i].index)));
    }
  }
  std::vector<SweepPoint> out;
  for (int k : ks) {
    std::vector<pipeline::ModelBundle> bundles;
    for (std::size_t i = 0; i < folds.size(); ++i) {
      const auto seed = pipeline::fold_seed(root_seed, folds[i].index);
      pipeline::ModelBundle b;
      b.features = base[i].with_neighbors(k);
      b.config = config;
      b.config.features.k_neighbors = k;
      b.seed = root_seed;
      auto nisr = pipeline::train_separate_model(
          b.features, model::Variant::kNisr, strategy, b.config, seed);
      if (variant == model::Variant::kHisr) {
        b.model = pipeline::train_hybrid_model(b.features, fisr[i]->model,
                                               nisr, b.config, seed);
      } else {
        b.model = std::move(nisr);
      }
      bundles.push_back(std::move(b));
    }
    std::vector<const pipeline::ModelBundle*> ptrs;
    for (const auto& b : bundles) ptrs.push_back(&b);
    out.push_back({k, run_experiment(ptrs, folds, eval)});
  }
  return out;
}

}  // namespace bundlerec::eval

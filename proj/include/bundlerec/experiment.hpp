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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bundlerec/corpus.hpp"
#include "bundlerec/metrics.hpp"
#include "bundlerec/pipeline.hpp"
#include "json.hpp"

namespace bundlerec::eval {

struct EvalConfig {
  std::vector<int> rounds{0, 1, 2, 3};
  int top_n = 10;
  // Selected-set draws per mashup for rounds >= 1; round 0 has one state.
  int draws = 3;
  std::uint64_t seed = 7;
};

// One ranked list for one (mashup, round, draw).
struct EvalRecord {
  int fold = 0;
  std::string mashup;
  int round = 0;
  int draw = 0;
  std::vector<std::string> selected;
  std::vector<std::string> rec;
  std::vector<std::string> act;
  int pool = 0;
  Metrics metrics;
  double random_f1 = 0.0;
};

struct RoundSummary {
  int round = 0;
  int records = 0;
  Metrics mean;
  double random_f1 = 0.0;
};

struct Report {
  std::string variant;
  std::string strategy;
  int top_n = 10;
  std::vector<RoundSummary> rounds;  // rounds with at least one record
  std::optional<Metrics> stage1;     // round 0
  std::optional<Metrics> stage2;     // mean of the round 1-3 means
  double stage2_random_f1 = 0.0;
  std::vector<EvalRecord> records;

  const RoundSummary* round(int r) const;
  nlohmann::json to_json(bool with_records = true) const;
  // variant, strategy, round, records, then the five metrics and the
  // random-baseline F1. Stage rows are labeled stage1 / stage2.
  void write_tsv(std::ostream& out, bool header = true) const;
};

// The state a test mashup is evaluated in: selected services in selection
// order, drawn with a seed shared by every model.
std::vector<int> round_selection(const corpus::Repository& repo, int mashup,
                                 int fold, int round, int draw,
                                 std::uint64_t seed);

// Rank every test mashup of `fold` in every admissible round. Round 0 uses
// the cold network, later rounds the warm one.
std::vector<EvalRecord> evaluate_fold(const pipeline::ModelBundle& bundle,
                                      const corpus::FoldSplit& fold,
                                      const EvalConfig& config);

Report summarize(const std::string& variant, const std::string& strategy,
                 int top_n, std::vector<EvalRecord> records);

// `models[i]` was trained on `folds[i]`.
Report run_experiment(const std::vector<const pipeline::ModelBundle*>& models,
                      const std::vector<corpus::FoldSplit>& folds,
                      const EvalConfig& config);

// Metric values of records present in both reports, matched on
// (fold, mashup, round, draw), restricted to rounds >= min_round.
std::pair<std::vector<double>, std::vector<double>> paired_values(
    const Report& a, const Report& b, const std::string& metric,
    int min_round = 1);

double metric_value(const Metrics& m, const std::string& name);

struct SweepPoint {
  int k = 0;
  Report report;
};

// Retrains NISR (and HISR, from `fisr` models per fold) with each neighbor
// count and evaluates it.
std::vector<SweepPoint> k_sweep(
    const corpus::Repository& repo, const std::vector<corpus::FoldSplit>& folds,
    model::Variant variant, model::Strategy strategy,
    const std::vector<int>& ks, const pipeline::PipelineConfig& config,
    std::uint64_t root_seed, const EvalConfig& eval,
    const std::vector<const pipeline::ModelBundle*>& fisr = {});

}  // namespace bundlerec::eval

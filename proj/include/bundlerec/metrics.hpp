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

#include <span>
#include <vector>

#include "json.hpp"

namespace bundlerec::eval {

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double map = 0.0;
  double ndcg = 0.0;

  Metrics& operator+=(const Metrics& o);
  Metrics operator/(double d) const;
};

nlohmann::json to_json(const Metrics& m);

// Top-`n` metrics of one ranked list `rec` (deduplicated, truncated to n)
// against the relevant set `act` (non-empty). MAP is normalized by
// `n_relevant`, NDCG by the ideal DCG of min(n, |act|) leading hits.
Metrics metrics_at_n(std::span<const int> rec, std::span<const int> act,
                     int n, int n_relevant);

// Expected F1 of `n` services drawn uniformly from a pool of `pool_size`
// holding `relevant` relevant ones.
double random_f1(int pool_size, int relevant, int n);

struct WilcoxonResult {
  double statistic = 0.0;  // sum of ranks of positive differences
  double z = 0.0;
  double p_value = 1.0;    // two-sided, normal approximation
  int n = 0;               // non-zero differences
};

// Paired signed-rank test with average ranks for ties and tie-corrected
// variance. Throws when fewer than 6 differences are non-zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a,
                                    std::span<const double> b);

}  // namespace bundlerec::eval

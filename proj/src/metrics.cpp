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

#include "bundlerec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "bundlerec/common.hpp"

namespace bundlerec::eval {

Metrics& Metrics::operator+=(const Metrics& o) {
  precision += o.precision;
  recall += o.recall;
  f1 += o.f1;
  map += o.map;
  ndcg += o.ndcg;
  return *this;
}

Metrics Metrics::operator/(double d) const {
  return {precision / d, recall / d, f1 / d, map / d, ndcg / d};
}

nlohmann::json to_json(const Metrics& m) {
  return {{"P", m.precision},
          {"R", m.recall},
          {"F1", m.f1},
          {"MAP", m.map},
          {"NDCG", m.ndcg}};
}

Metrics metrics_at_n(std::span<const int> rec, std::span<const int> act,
                     int n, int n_relevant) {
  if (act.empty()) throw ConfigError("metrics need a non-empty relevant set");
  if (n < 1 || n_relevant < 1) throw ConfigError("n and N_m must be >= 1");
  const std::set<int> relevant(act.begin(), act.end());
  const std::size_t len = std::min<std::size_t>(rec.size(), n);
  int hits = 0;
  double ap = 0, dcg = 0;
  for (std::size_t i = 0; i < len; ++i) {
    if (!relevant.count(rec[i])) continue;
    ++hits;
    const double rank = static_cast<double>(i + 1);
    ap += hits / rank;
    dcg += 1.0 / std::log2(1.0 + rank);
  }
  double ideal = 0;
  const std::size_t ideal_hits = std::min<std::size_t>(n, relevant.size());
  for (std::size_t i = 1; i <= ideal_hits; ++i) {
    ideal += 1.0 / std::log2(1.0 + static_cast<double>(i));
  }
  Metrics m;
  if (len > 0) m.precision = static_cast<double>(hits) / len;
  m.recall = static_cast<double>(hits) / relevant.size();
  m.f1 = 2.0 * hits / static_cast<double>(len + relevant.size());
  m.map = ap / n_relevant;
  m.ndcg = dcg / ideal;
  return m;
}

double random_f1(int pool_size, int relevant, int n) {
  if (pool_size <= 0 || relevant <= 0) return 0.0;
  const double shown = std::min(n, pool_size);
  const double expected_hits = shown * relevant / pool_size;
  return 2.0 * expected_hits / (shown + relevant);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a,
                                    std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("paired samples differ in size");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  }
  const int n = static_cast<int>(d.size());
  if (n < 6) {
    throw ConfigError("signed-rank test needs at least 6 non-zero differences, got " +
                      std::to_string(n));
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    return std::abs(d[x]) < std::abs(d[y]);
  });
  std::vector<double> rank(n);
  double tie_term = 0;
  for (int i = 0; i < n;) {
    int j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const double avg = 0.5 * (i + j) + 1.0;
    for (int k = i; k <= j; ++k) rank[order[k]] = avg;
    const double t = j - i + 1;
    tie_term += t * t * t - t;
    i = j + 1;
  }
  WilcoxonResult r;
  r.n = n;
  for (int i = 0; i < n; ++i) {
    if (d[i] > 0) r.statistic += rank[i];
  }
  const double mean = n * (n + 1) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  r.z = (r.statistic - mean) / std::sqrt(var);
  r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
  return r;
}

}  // namespace bundlerec::eval

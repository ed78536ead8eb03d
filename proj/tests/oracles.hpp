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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "bundlerec/graphfeat.hpp"
#include "bundlerec/metrics.hpp"

// Reference computations written independently of the library code.
namespace bundlerec::testing {

// All five metrics recomputed from the hit indicator sequence I(1..len).
inline eval::Metrics metric_oracle(const std::vector<int>& rec,
                                   const std::vector<int>& act, int n,
                                   int n_relevant) {
  std::vector<int> I;
  for (int i = 0; i < std::min<int>(n, rec.size()); ++i) {
    I.push_back(std::count(act.begin(), act.end(), rec[i]) > 0 ? 1 : 0);
  }
  const double len = I.size();
  double hits = 0;
  for (int x : I) hits += x;
  eval::Metrics m;
  m.precision = len > 0 ? hits / len : 0.0;
  m.recall = hits / act.size();
  m.f1 = m.precision + m.recall > 0
             ? 2 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  for (std::size_t i = 0; i < I.size(); ++i) {
    if (!I[i]) continue;
    double upto = 0;
    for (std::size_t j = 0; j <= i; ++j) upto += I[j];
    m.map += upto / (i + 1.0);
  }
  m.map /= n_relevant;
  double dcg = 0, idcg = 0;
  for (std::size_t i = 0; i < I.size(); ++i) dcg += I[i] / std::log2(i + 2.0);
  for (int i = 0; i < std::min<int>(n, act.size()); ++i) {
    idcg += 1.0 / std::log2(i + 2.0);
  }
  m.ndcg = dcg / idcg;
  return m;
}

inline double max_metric_gap(const eval::Metrics& a, const eval::Metrics& b) {
  return std::max({std::abs(a.precision - b.precision),
                   std::abs(a.recall - b.recall), std::abs(a.f1 - b.f1),
                   std::abs(a.map - b.map), std::abs(a.ndcg - b.ndcg)});
}

// Toy graph with every kind of second-order step: a triangle 0-1-2, a tail
// 1-3-4 and a pendant 2-5.
inline graph::Graph walk_toy_graph() {
  graph::Graph g;
  for (int i = 0; i < 6; ++i) g.add_node("n" + std::to_string(i));
  for (auto [a, b] : std::vector<std::pair<int, int>>{
           {0, 1}, {1, 2}, {2, 0}, {1, 3}, {3, 4}, {2, 5}}) {
    g.add_edge(a, b);
  }
  return g;
}

struct WalkLawResult {
  long transitions = 0;
  double max_deviation = 0.0;  // over every (previous, current, next)
  double chi_square = 0.0;
  int dof = 0;
  double critical = 0.0;  // chi-square quantile at 0.99
};

// Empirical second-order transition frequencies of generated walks against
// the analytic law: 1/p back, 1 to common neighbours, 1/q further out.
inline WalkLawResult walk_law(const graph::Graph& g, double p, double q,
                              int walk_length, int walks_per_node,
                              std::uint64_t seed) {
  std::set<std::pair<int, int>> edges;
  for (int a = 0; a < g.num_nodes(); ++a) {
    for (int b : g.neighbors(a)) edges.insert({a, b});
  }
  auto linked = [&](int a, int b) { return edges.count({a, b}) > 0; };

  graph::WalkConfig cfg;
  cfg.p = p;
  cfg.q = q;
  cfg.walk_length = walk_length;
  cfg.walks_per_node = walks_per_node;
  const auto walks = graph::biased_walks(g, cfg, seed);

  std::map<std::pair<int, int>, std::map<int, long>> counts;
  WalkLawResult out;
  for (const auto& w : walks) {
    for (std::size_t i = 2; i < w.size(); ++i) {
      ++counts[{w[i - 2], w[i - 1]}][w[i]];
      ++out.transitions;
    }
  }
  for (const auto& [state, next] : counts) {
    const auto [t, v] = state;
    std::map<int, double> weight;
    double total = 0;
    for (int x = 0; x < g.num_nodes(); ++x) {
      if (!linked(v, x)) continue;
      const double w = x == t ? 1.0 / p : linked(t, x) ? 1.0 : 1.0 / q;
      weight[x] = w;
      total += w;
    }
    long seen = 0;
    for (const auto& [x, c] : next) seen += c;
    for (const auto& [x, w] : weight) {
      const double expected = w / total;
      const auto it = next.find(x);
      const double observed = it == next.end() ? 0.0 : it->second;
      out.max_deviation =
          std::max(out.max_deviation, std::abs(observed / seen - expected));
      const double e = expected * seen;
      out.chi_square += (observed - e) * (observed - e) / e;
    }
    out.dof += static_cast<int>(weight.size()) - 1;
  }
  boost::math::chi_squared dist(out.dof);
  out.critical = boost::math::quantile(dist, 0.99);
  return out;
}

}  // namespace bundlerec::testing

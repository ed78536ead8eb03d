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

#include "bundlerec/graphfeat.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace bundlerec::graph {

int Graph::add_node(const std::string& id) {
  auto [it, inserted] = index_.emplace(id, static_cast<int>(ids_.size()));
  if (inserted) {
    ids_.push_back(id);
    adj_.emplace_back();
  }
  return it->second;
}

void Graph::add_edge(int a, int b) {
  if (a == b) throw IntegrityError("self-loop on node " + ids_.at(a));
  auto insert = [](std::vector<int>& list, int v) {
    auto it = std::lower_bound(list.begin(), list.end(), v);
    if (it != list.end() && *it == v) return false;
    list.insert(it, v);
    return true;
  };
  if (insert(adj_.at(a), b)) {
    insert(adj_.at(b), a);
    ++edges_;
  }
}

int Graph::index(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? -1 : it->second;
}

bool Graph::adjacent(int a, int b) const {
  const auto& list = adj_.at(a);
  return std::binary_search(list.begin(), list.end(), b);
}

BipartiteGraph build_graph(const corpus::Repository& repo,
                           const corpus::InvocationMatrix& matrix,
                           std::span<const int> mashups) {
  BipartiteGraph bg;
  bg.mashup_node.assign(repo.num_mashups(), -1);
  bg.service_node.assign(repo.num_services(), -1);
  std::vector<int> sorted(mashups.begin(), mashups.end());
  std::sort(sorted.begin(), sorted.end());
  for (int m : sorted) bg.mashup_node[m] = bg.graph.add_node(repo.mashup(m).id);
  for (int s = 0; s < repo.num_services(); ++s) {
    bg.service_node[s] = bg.graph.add_node(repo.service(s).id);
  }
  for (int m : sorted) {
    for (int s : matrix.services_of(m)) {
      bg.graph.add_edge(bg.mashup_node[m], bg.service_node[s]);
    }
  }
  return bg;
}

void validate(const WalkConfig& c) {
  if (!(c.p > 0) || !(c.q > 0)) throw ConfigError("p and q must be > 0");
  if (c.walk_length < 2) throw ConfigError("walk length must be >= 2");
  if (c.walks_per_node < 1 || c.window < 1 || c.dim < 1 || c.epochs < 0 ||
      c.negatives < 0) {
    throw ConfigError("invalid walk/skip-gram configuration");
  }
}

std::vector<double> transition_weights(const Graph& g, int previous,
                                       int current, const WalkConfig& config) {
  const auto& nbrs = g.neighbors(current);
  std::vector<double> w(nbrs.size(), 1.0);
  if (previous < 0) return w;
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    const int x = nbrs[i];
    if (x == previous) {
      w[i] = 1.0 / config.p;
    } else if (g.adjacent(x, previous)) {
      w[i] = 1.0;
    } else {
      w[i] = 1.0 / config.q;
    }
  }
  return w;
}

namespace {

int sample_index(const std::vector<double>& weights, Rng& rng) {
  double total = 0;
  for (double w : weights) total += w;
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

}  // namespace

std::vector<Walk> biased_walks(const Graph& g, const WalkConfig& config,
                               std::uint64_t seed) {
  validate(config);
  if (g.num_nodes() == 0) throw ConfigError("cannot walk an empty graph");
  std::vector<Walk> walks;
  for (int r = 0; r < config.walks_per_node; ++r) {
    for (int start = 0; start < g.num_nodes(); ++start) {
      if (g.degree(start) == 0) continue;
      Rng rng(derive_seed(seed, "walk/" + std::to_string(r) + "/" + g.id(start)));
      Walk walk{start};
      int prev = -1;
      while (static_cast<int>(walk.size()) < config.walk_length) {
        const int cur = walk.back();
        if (g.degree(cur) == 0) break;
        auto weights = transition_weights(g, prev, cur, config);
        const int next = g.neighbors(cur)[sample_index(weights, rng)];
        prev = cur;
        walk.push_back(next);
      }
      walks.push_back(std::move(walk));
    }
  }
  Rng order(derive_seed(seed, "walk-order"));
  std::shuffle(walks.begin(), walks.end(), order);
  return walks;
}

nn::Vector NodeEmbedding::at(const std::string& id) const {
  auto it = index.find(id);
  if (it == index.end()) throw Error("no embedding for node " + id);
  return vectors.col(it->second);
}

void NodeEmbedding::write(std::ostream& out) const {
  for (std::size_t n = 0; n < ids.size(); ++n) {
    out << ids[n];
    for (Eigen::Index k = 0; k < vectors.rows(); ++k) {
      out << ' ' << std::setprecision(17) << vectors(k, static_cast<Eigen::Index>(n));
    }
    out << '\n';
  }
}

NodeEmbedding NodeEmbedding::read(std::istream& in) {
  NodeEmbedding emb;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id;
    ss >> id;
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (!rows.empty() && vals.size() != rows.front().size()) {
      throw Error("inconsistent embedding dimension for node " + id);
    }
    emb.index.emplace(id, static_cast<int>(emb.ids.size()));
    emb.ids.push_back(id);
    rows.push_back(std::move(vals));
  }
  const Eigen::Index dim = rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size());
  emb.vectors.resize(dim, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t n = 0; n < rows.size(); ++n) {
    for (Eigen::Index k = 0; k < dim; ++k) {
      emb.vectors(k, static_cast<Eigen::Index>(n)) = rows[n][k];
    }
  }
  return emb;
}

namespace {

double sigmoid(double x) {
  if (x > 30) return 1.0;
  if (x < -30) return 0.0;
  return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

SkipGramResult skipgram_train(const Graph& g, const std::vector<Walk>& walks,
                              const WalkConfig& config, std::uint64_t seed) {
  validate(config);
  if (walks.empty()) throw ConfigError("skip-gram needs at least one walk");
  const int n = g.num_nodes();
  const int dim = config.dim;
  Rng rng(derive_seed(seed, "skipgram"));

  nn::Matrix in_vec(dim, n);
  std::uniform_real_distribution<double> init(-0.5 / dim, 0.5 / dim);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < dim; ++k) in_vec(k, j) = init(rng);
  }
  nn::Matrix out_vec = nn::Matrix::Zero(dim, n);

  std::vector<double> freq(n, 0.0);
  std::size_t pairs_per_epoch = 0;
  for (const auto& walk : walks) {
    for (int v : walk) freq[v] += 1.0;
    for (std::size_t i = 0; i < walk.size(); ++i) {
      const std::size_t lo = i >= static_cast<std::size_t>(config.window)
                                 ? i - config.window
                                 : 0;
      const std::size_t hi = std::min(walk.size() - 1, i + config.window);
      pairs_per_epoch += hi - lo;
    }
  }
  std::vector<double> noise_cdf(n);
  double acc = 0;
  for (int j = 0; j < n; ++j) {
    acc += std::pow(freq[j], 0.75);
    noise_cdf[j] = acc;
  }
  auto draw_noise = [&]() {
    double u = std::uniform_real_distribution<double>(0.0, acc)(rng);
    auto it = std::upper_bound(noise_cdf.begin(), noise_cdf.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(
        it - noise_cdf.begin(), n - 1));
  };

  SkipGramResult result;
  const double total_steps =
      static_cast<double>(pairs_per_epoch) * std::max(config.epochs, 1);
  double step = 0;
  nn::Vector grad_in(dim);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss = 0;
    std::size_t count = 0;
    for (const auto& walk : walks) {
      for (std::size_t i = 0; i < walk.size(); ++i) {
        const int center = walk[i];
        const std::size_t lo = i >= static_cast<std::size_t>(config.window)
                                   ? i - config.window
                                   : 0;
        const std::size_t hi = std::min(walk.size() - 1, i + config.window);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const int context = walk[j];
          const double lr = config.learning_rate *
                            std::max(1e-4, 1.0 - step / total_steps);
          step += 1;
          grad_in.setZero();
          auto update = [&](int target, double label) {
            const double score = in_vec.col(center).dot(out_vec.col(target));
            const double pred = sigmoid(score);
            loss -= label > 0 ? std::log(std::max(pred, 1e-12))
                              : std::log(std::max(1.0 - pred, 1e-12));
            const double g = (label - pred) * lr;
            grad_in += g * out_vec.col(target);
            out_vec.col(target) += g * in_vec.col(center);
          };
          update(context, 1.0);
          for (int k = 0; k < config.negatives; ++k) {
            const int neg = draw_noise();
            if (neg == context) continue;
            update(neg, 0.0);
          }
          in_vec.col(center) += grad_in;
          ++count;
        }
      }
    }
    result.epoch_loss.push_back(count ? loss / static_cast<double>(count) : 0.0);
  }

  auto& emb = result.embedding;
  emb.vectors = std::move(in_vec);
  for (int j = 0; j < n; ++j) {
    emb.ids.push_back(g.id(j));
    emb.index.emplace(g.id(j), j);
  }
  return result;
}

}  // namespace bundlerec::graph

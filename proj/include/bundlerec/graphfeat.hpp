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
#include <string>
#include <unordered_map>
#include <vector>

#include "bundlerec/corpus.hpp"
#include "bundlerec/neural.hpp"

namespace bundlerec::graph {

// Undirected simple graph with string node ids. Adjacency lists are sorted.
class Graph {
 public:
  int add_node(const std::string& id);
  void add_edge(int a, int b);

  int num_nodes() const { return static_cast<int>(ids_.size()); }
  std::size_t num_edges() const { return edges_; }
  const std::string& id(int node) const { return ids_.at(node); }
  int index(const std::string& id) const;  // -1 if absent
  const std::vector<int>& neighbors(int node) const { return adj_.at(node); }
  int degree(int node) const {
    return static_cast<int>(adj_.at(node).size());
  }
  bool adjacent(int a, int b) const;

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::vector<int>> adj_;
  std::size_t edges_ = 0;
};

// Mashup and service nodes joined by invocation edges. Node order: the
// mashups listed in `mashups` (ascending index), then every service.
struct BipartiteGraph {
  Graph graph;
  std::vector<int> mashup_node;  // by mashup index, -1 when not a node
  std::vector<int> service_node;  // by service index
};

BipartiteGraph build_graph(const corpus::Repository& repo,
                           const corpus::InvocationMatrix& matrix,
                           std::span<const int> mashups);

struct WalkConfig {
  double p = 0.25;      // return parameter
  double q = 4.0;       // in-out parameter
  int walk_length = 10;
  int walks_per_node = 10;
  int window = 5;
  int negatives = 5;
  int dim = 25;
  int epochs = 5;
  double learning_rate = 0.025;
};

void validate(const WalkConfig& config);

// Unnormalized second-order transition weights for stepping out of
// `current` having arrived from `previous` (-1 for the first step).
std::vector<double> transition_weights(const Graph& g, int previous,
                                       int current, const WalkConfig& config);

using Walk = std::vector<int>;

// `walks_per_node` walks from every node with degree >= 1. Each walk has its
// own derived seed, so the result does not depend on generation order.
std::vector<Walk> biased_walks(const Graph& g, const WalkConfig& config,
                               std::uint64_t seed);

struct NodeEmbedding {
  std::vector<std::string> ids;
  nn::Matrix vectors;  // dim x nodes, column per node
  std::unordered_map<std::string, int> index;

  int dim() const { return static_cast<int>(vectors.rows()); }
  bool contains(const std::string& id) const { return index.count(id) > 0; }
  nn::Vector at(const std::string& id) const;

  // `node_id v1 ... v_dim` per line.
  void write(std::ostream& out) const;
  static NodeEmbedding read(std::istream& in);
};

struct SkipGramResult {
  NodeEmbedding embedding;
  std::vector<double> epoch_loss;  // mean negative-sampling loss per epoch
};

// Skip-gram with negative sampling over walk windows; noise distribution is
// walk-corpus unigram frequency to the 3/4 power, learning rate decays
// linearly to zero. Nodes absent from every walk keep their initialization.
SkipGramResult skipgram_train(const Graph& g, const std::vector<Walk>& walks,
                              const WalkConfig& config, std::uint64_t seed);

}  // namespace bundlerec::graph

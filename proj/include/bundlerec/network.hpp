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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bundlerec/checkpoint.hpp"
#include "bundlerec/neural.hpp"
#include "bundlerec/textfeat.hpp"
#include "json.hpp"

namespace bundlerec::model {

using nn::Matrix;
using nn::Vector;

enum class Variant { kFisr, kNisr, kHisr };
enum class Strategy { kAttention, kAverage, kConcat, kNone };

std::string to_string(Variant v);
std::string to_string(Strategy s);
Variant parse_variant(std::string_view text);
Strategy parse_strategy(std::string_view text);

// Slots used by the concatenation strategy.
inline constexpr int kConcatSlots = 3;

// Column indices into a feature table, one entry per sample.
struct PathwayInput {
  std::vector<int> mashup;
  std::vector<std::vector<int>> selected;  // selection order
  std::vector<int> candidate;

  int size() const { return static_cast<int>(candidate.size()); }
  void push(int m, std::vector<int> sel, int s) {
    mashup.push_back(m);
    selected.push_back(std::move(sel));
    candidate.push_back(s);
  }
};

// Selected-service aggregation plus the interaction MLP over one feature
// space. Mashup, selected and candidate features share the dimension.
class Pathway {
 public:
  Pathway() = default;
  Pathway(const std::string& name, int feature_dim, Strategy strategy,
          const std::vector<int>& attention_units,
          const std::vector<int>& interaction_units, Rng& rng);

  int feature_dim() const { return dim_; }
  int output_dim() const { return interaction.out_dim(); }
  int aggregate_dim() const {
    return strategy_ == Strategy::kConcat ? kConcatSlots * dim_ : dim_;
  }
  Strategy strategy() const { return strategy_; }

  struct Cache {
    std::vector<int> pair_offset;  // B + 1 entries into the flattened pairs
    Matrix attention_input;
    std::vector<nn::DenseCache> attention;
    Vector weights;  // one per (sample, selected) pair
    std::vector<nn::DenseCache> interaction;
  };

  // Interaction vectors, one column per sample.
  Matrix forward(const Matrix& table, const PathwayInput& in,
                 Cache& cache) const;
  Matrix apply(const Matrix& table, const PathwayInput& in) const;
  // Accumulates parameter gradients. Returns d/d table when requested.
  Matrix backward(const Matrix& di, const Matrix& table,
                  const PathwayInput& in, const Cache& cache,
                  bool want_table_grad);

  // Aggregation weights of sample `b` (empty for concat and none).
  std::vector<double> weights(const Cache& cache, int b) const;

  // v_SS per sample; `keep` retains what backward needs.
  Matrix aggregate(const Matrix& table, const PathwayInput& in, Cache& cache,
                   bool keep = false) const;

  void collect(nn::ParamRefs& out);

  nn::Mlp attention;
  nn::Mlp interaction;

 private:

  int dim_ = 0;
  Strategy strategy_ = Strategy::kAttention;
};

struct Aggregate {
  Vector v_ss;
  std::vector<double> weights;
};

// Single-sample aggregation of selected-service features (columns of
// `selected`) against `candidate`.
Aggregate aggregate_selected(Strategy strategy, const Matrix& selected,
                             const Vector& candidate,
                             const nn::Mlp& attention);

struct NetworkConfig {
  Variant variant = Variant::kHisr;
  Strategy strategy = Strategy::kAttention;
  int vocab_size = 0;
  text::TextConfig text;
  int node_dim = 25;
  std::vector<int> attention_units{80, 40};
  std::vector<int> interaction_units{100, 50};
  std::vector<int> integration_units{128, 64, 32};

  bool has_content() const { return variant != Variant::kNisr; }
  bool has_invocation() const { return variant != Variant::kFisr; }

  nlohmann::json to_json() const;
  static NetworkConfig from_json(const nlohmann::json& j);
};

// What one forward pass consumes. The content side either runs the
// extractor over `entities` or reads precomputed `content_features`.
struct Batch {
  std::vector<const text::ContentInput*> entities;
  const Matrix* content_features = nullptr;
  PathwayInput content;
  Matrix invocation_table;
  PathwayInput invocation;
  std::vector<int> labels;

  int size() const {
    return std::max(content.size(), invocation.size());
  }
};

// FISR (content pathway), NISR (invocation pathway) or HISR (both joined by
// an integration MLP). The output layer is a 2-way softmax whose positive
// class probability is the score.
class Network {
 public:
  Network() = default;
  Network(const NetworkConfig& config, Rng& rng);

  const NetworkConfig& config() const { return config_; }
  // Width of the interaction vector fed to the head.
  int interaction_dim() const;

  struct HeadCache {
    std::vector<nn::DenseCache> integration;
    nn::DenseCache output;
    Matrix probs;
  };
  struct Cache {
    text::ContentExtractor::Cache extractor;
    Matrix content_table;
    bool ran_extractor = false;
    Pathway::Cache content;
    Pathway::Cache invocation;
    HeadCache head;
  };

  // Positive-class probability per sample.
  Vector forward(const Batch& batch, Cache& cache) const;
  Vector predict(const Batch& batch) const;
  // Gradients of mean cross-entropy over the batch labels. Returns the loss.
  double backward(const Batch& batch, const Cache& cache, const Vector& pred);

  // Interaction vectors without the head (ci, hi or ci over hi).
  Matrix interaction(const Batch& batch) const;
  Vector head_forward(const Matrix& interaction, HeadCache& cache) const;
  // Mean cross-entropy gradients through the head. Fills d/d interaction
  // when `d_interaction` is non-null. Returns the loss.
  double head_backward(const HeadCache& cache, const Vector& pred,
                       std::span<const int> labels, Matrix* d_interaction);

  // Per-sample aggregation weights; HISR averages the two pathways.
  std::vector<double> attention_weights(const Cache& cache, int b) const;

  nn::ParamRefs params();
  // Everything below the integration head (HISR) or output layer.
  nn::ParamRefs underlying_params();
  nn::ParamRefs head_params();

  void save(Checkpoint& ckpt, const std::string& prefix) const;
  void load(const Checkpoint& ckpt, const std::string& prefix);
  // Copies the matching pathway parameters of a trained FISR/NISR network.
  void import_underlying(const Network& source);

  std::optional<text::ContentExtractor> extractor;
  std::optional<Pathway> content;
  std::optional<Pathway> invocation;
  nn::Mlp integration;
  nn::DenseLayer output;

 private:
  Matrix content_table(const Batch& batch, Cache* cache) const;

  NetworkConfig config_;
};

}  // namespace bundlerec::model

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
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "bundlerec/checkpoint.hpp"
#include "bundlerec/corpus.hpp"
#include "bundlerec/graphfeat.hpp"
#include "bundlerec/hin.hpp"
#include "bundlerec/network.hpp"
#include "bundlerec/textfeat.hpp"
#include "bundlerec/training.hpp"
#include "json.hpp"

namespace bundlerec::pipeline {

using nn::Matrix;
using nn::Vector;

struct FeatureConfig {
  text::TextConfig text;
  hin::LdaConfig lda;
  graph::WalkConfig walk;
  int k_neighbors = 20;
  // Divide the neighbor-weighted mashup embedding by the similarity total.
  bool normalize_vm = false;

  nlohmann::json to_json() const;
  static FeatureConfig from_json(const nlohmann::json& j);
};

struct PipelineConfig {
  FeatureConfig features;
  corpus::SamplingConfig sampling;
  model::TrainConfig train;

  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
};

// Identity of a repository's entity ids, used to refuse checkpoints built
// on different data.
std::uint64_t repository_fingerprint(const corpus::Repository& repo);

// Everything derived from one fold's training data: vocabulary, encoded
// content, topic model, HIN index and node embeddings.
class FoldFeatures {
 public:
  static FoldFeatures build(const corpus::Repository& repo,
                            const corpus::FoldSplit& fold,
                            const FeatureConfig& config, std::uint64_t seed);

  // Stored under "features/"; restore needs the same repository.
  void store(Checkpoint& ckpt) const;
  static FoldFeatures restore(const Checkpoint& ckpt,
                              const corpus::Repository& repo);
  std::uint64_t fingerprint() const;

  const corpus::Repository& repo() const { return *repo_; }
  const FeatureConfig& config() const { return config_; }
  int fold_index() const { return fold_index_; }
  const std::vector<int>& train_mashups() const { return train_; }
  bool is_train(int mashup) const { return index_.contains(mashup); }
  const text::Vocab& vocab() const { return vocab_; }
  const hin::TopicModel& topics() const { return lda_; }
  const hin::HinIndex& index() const { return index_; }
  const graph::NodeEmbedding& nodes() const { return nodes_; }
  const Matrix& service_embeddings() const { return service_emb_; }
  const text::ContentInput& service_input(int s) const {
    return service_inputs_.at(s);
  }
  const text::ContentInput& mashup_input(int m) const {
    return mashup_inputs_.at(m);
  }
  const std::vector<int>& mashup_topics(int m) const {
    return mashup_topics_.at(m);
  }

  text::ContentInput requirement_input(
      const std::vector<std::string>& tokens,
      const std::vector<std::string>& tags) const;
  // Top topics of unseen text by fold-in.
  std::vector<int> infer_topics(const std::vector<std::string>& tokens) const;

  hin::TargetState mashup_target(int mashup,
                                 std::span<const int> selected) const;
  hin::TargetEmbedding embed_target(const hin::TargetState& target) const;
  // Neighbor-weighted embedding of an existing mashup under a selection,
  // memoized per (mashup, selected set).
  Vector mashup_vm(int mashup, std::span<const int> selected) const;

  // Copy that uses `k` neighbors (memo cleared).
  FoldFeatures with_neighbors(int k) const;

  // Batch over training samples for a network of the given shape.
  model::Batch make_batch(std::span<const corpus::Sample> samples,
                          const model::NetworkConfig& net) const;

 private:
  void derive_tables();

  const corpus::Repository* repo_ = nullptr;
  FeatureConfig config_;
  std::uint64_t seed_ = 0;
  int fold_index_ = -1;
  std::vector<int> train_;
  text::Vocab vocab_;
  hin::TopicModel lda_;
  std::vector<std::vector<int>> mashup_topics_;
  std::vector<std::vector<int>> service_topics_;
  hin::HinIndex index_;
  graph::NodeEmbedding nodes_;
  Matrix service_emb_;
  std::vector<text::ContentInput> service_inputs_;
  std::vector<text::ContentInput> mashup_inputs_;

  struct Memo {
    std::mutex mu;
    std::map<std::pair<int, std::vector<int>>, Vector> vm;
  };
  std::shared_ptr<Memo> memo_ = std::make_shared<Memo>();
};

// Warm network for rounds with selected services, cold network (strategy
// none, trained on empty selections only) for the first round.
struct TrainedModel {
  model::Variant variant = model::Variant::kHisr;
  model::Strategy strategy = model::Strategy::kAttention;
  model::Network warm;
  model::Network cold;
  nlohmann::json traces = nlohmann::json::object();
};

struct ModelBundle {
  TrainedModel model;
  FoldFeatures features;
  PipelineConfig config;
  std::uint64_t seed = 0;
};

// Trains FISR or NISR on one fold.
TrainedModel train_separate_model(const FoldFeatures& features,
                                  model::Variant variant,
                                  model::Strategy strategy,
                                  const PipelineConfig& config,
                                  std::uint64_t seed);

// HISR from trained FISR and NISR models of the same fold and strategy.
TrainedModel train_hybrid_model(const FoldFeatures& features,
                                const TrainedModel& fisr,
                                const TrainedModel& nisr,
                                const PipelineConfig& config,
                                std::uint64_t seed);

Checkpoint to_checkpoint(const ModelBundle& bundle);
ModelBundle from_checkpoint(const Checkpoint& ckpt,
                            const corpus::Repository& repo);

// Per-fold seed used for features, sampling and training.
std::uint64_t fold_seed(std::uint64_t root, int fold_index);

struct ScoredService {
  int service = 0;
  double score = 0.0;
};

struct Ranking {
  std::vector<ScoredService> items;
  // Aggregation weights of the selected services for the top item.
  std::vector<double> attention;
};

// Scores candidate pools for one mashup state with a frozen network.
class Scorer {
 public:
  Scorer(const model::Network& net, const FoldFeatures& features);

  struct Query {
    text::ContentInput content;
    hin::TargetState target;
    std::vector<int> selected;
  };

  Query mashup_query(int mashup, std::span<const int> selected) const;
  Query requirement_query(const std::vector<std::string>& tokens,
                          const std::vector<std::string>& tags,
                          std::span<const int> selected) const;

  // Scores in pool order, with per-candidate aggregation weights.
  std::vector<double> score(const Query& query, std::span<const int> pool,
                            std::vector<std::vector<double>>* weights =
                                nullptr) const;
  Ranking rank(const Query& query, std::span<const int> pool, int n) const;

 private:
  const model::Network* net_;
  const FoldFeatures* features_;
  Matrix service_content_;  // content features of every service
};

// Every service index not in `selected`.
std::vector<int> candidate_pool(int num_services,
                                std::span<const int> selected);

}  // namespace bundlerec::pipeline

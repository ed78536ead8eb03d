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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bundlerec/corpus.hpp"
#include "bundlerec/graphfeat.hpp"
#include "bundlerec/neural.hpp"

namespace bundlerec::hin {

struct LdaConfig {
  int topics = 20;
  int iterations = 200;
  double alpha = 0.1;
  double beta = 0.01;
  int fold_in_iterations = 50;
};

// Collapsed-Gibbs LDA over token sequences.
class TopicModel {
 public:
  TopicModel() = default;

  static TopicModel fit(const std::vector<std::vector<std::string>>& documents,
                        const LdaConfig& config, std::uint64_t seed);

  int num_topics() const { return config_.topics; }
  const LdaConfig& config() const { return config_; }
  const std::vector<std::string>& words() const { return words_; }
  // Training-document topic distributions, in fit order.
  const std::vector<std::vector<double>>& distributions() const {
    return theta_;
  }
  const std::vector<std::vector<int>>& assignments() const { return z_; }
  const nn::Matrix& topic_word() const { return topic_word_; }

  // Distribution for an unseen document with topic-word counts frozen.
  // Tokens outside the training vocabulary are ignored.
  std::vector<double> infer(const std::vector<std::string>& document,
                            std::uint64_t seed) const;

  // Three most probable topics, ties broken by lower topic id.
  static std::array<int, 3> top_topics(const std::vector<double>& dist);

  // Rebuilds an inference-only model from stored counts.
  static TopicModel from_counts(const LdaConfig& config,
                                std::vector<std::string> words,
                                nn::Matrix topic_word);

 private:
  LdaConfig config_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> word_index_;
  nn::Matrix topic_word_;  // topics x words, assignment counts
  std::vector<double> topic_total_;
  std::vector<std::vector<double>> theta_;
  std::vector<std::vector<int>> z_;
};

TopicModel fit_lda(const std::vector<std::vector<std::string>>& documents,
                   const LdaConfig& config, std::uint64_t seed);

inline constexpr int kNumMetaPaths = 6;
inline constexpr std::array<double, kNumMetaPaths> kMetaPathWeights = {
    0.14, 0.14, 0.27, 0.15, 0.15, 0.15};

// Sorted integer sets describing one mashup in the network. The derived
// sets (paths 4-6) are unions over its component services.
struct MashupNode {
  std::vector<int> topics;
  std::vector<int> tags;
  std::vector<int> services;
  std::vector<int> service_topics;
  std::vector<int> service_tags;
  std::vector<int> service_providers;
};

// A mashup being built: requirements topics and tags are always known,
// component-based sets come from the currently selected services.
struct TargetState {
  std::vector<int> topics;
  std::vector<std::string> tags;
  std::vector<int> selected;
  std::optional<int> self;  // excluded from neighbor search when indexed
};

struct Neighbor {
  int mashup = 0;
  double similarity = 0.0;
};

class HinIndex {
 public:
  HinIndex() = default;

  // `mashup_topics[i]` are the topics of `mashups[i]`, `service_topics` is
  // indexed by service.
  static HinIndex build(const corpus::Repository& repo,
                        std::span<const int> mashups,
                        const std::vector<std::vector<int>>& mashup_topics,
                        const std::vector<std::vector<int>>& service_topics);

  const std::vector<int>& mashups() const { return mashups_; }
  bool contains(int mashup) const { return slot_.count(mashup) > 0; }
  const MashupNode& node(int mashup) const;
  MashupNode node_for(const TargetState& target) const;

  const corpus::Repository* repository() const { return repo_; }

 private:
  const corpus::Repository* repo_ = nullptr;
  std::vector<int> mashups_;
  std::unordered_map<int, int> slot_;
  std::vector<MashupNode> nodes_;
  std::vector<std::vector<int>> service_topics_;
  std::vector<std::vector<int>> service_tags_;
  std::vector<int> service_provider_;
  std::unordered_map<std::string, int> tag_ids_;
  std::unordered_map<std::string, int> provider_ids_;
};

// 2|A n B| / (|A| + |B|), zero when either set is empty. Inputs sorted.
double dice(const std::vector<int>& a, const std::vector<int>& b);

// Similarity along meta-path `path` (1..6).
double metapath_sim(const MashupNode& a, const MashupNode& b, int path);
double metapath_sim(const HinIndex& index, int m1, int m2, int path);

std::array<double, kNumMetaPaths> similarity_profile(const MashupNode& a,
                                                     const MashupNode& b);

double overall_sim(const std::array<double, kNumMetaPaths>& sims,
                   const std::array<double, kNumMetaPaths>& weights =
                       kMetaPathWeights);

// Top-K indexed mashups by overall similarity, descending, ties by
// ascending mashup id.
std::vector<Neighbor> find_neighbors(const HinIndex& index,
                                     const TargetState& target, int k);

struct TargetEmbedding {
  nn::Vector vector;
  bool empty_neighborhood = false;
};

// Similarity-weighted sum of neighbor node vectors; with `normalize` the
// weights are divided by their total.
TargetEmbedding target_embedding(const std::vector<Neighbor>& neighbors,
                                 const corpus::Repository& repo,
                                 const graph::NodeEmbedding& embeddings,
                                 bool normalize = false);

}  // namespace bundlerec::hin

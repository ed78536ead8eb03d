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

#include "bundlerec/hin.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace bundlerec::hin {

namespace {

int sample_topic(const std::vector<double>& weights, double total, Rng& rng) {
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    u -= weights[k];
    if (u < 0) return static_cast<int>(k);
  }
  return static_cast<int>(weights.size()) - 1;
}

std::vector<double> normalized_theta(const std::vector<int>& doc_topic,
                                     std::size_t length, const LdaConfig& c) {
  std::vector<double> theta(c.topics);
  const double denom = static_cast<double>(length) + c.topics * c.alpha;
  for (int k = 0; k < c.topics; ++k) {
    theta[k] = (doc_topic[k] + c.alpha) / denom;
  }
  return theta;
}

void check_config(const LdaConfig& c) {
  if (c.topics < 3) {
    throw ConfigError("LDA needs at least 3 topics for top-3 extraction");
  }
  if (c.iterations < 0 || c.fold_in_iterations < 0 || !(c.alpha > 0) ||
      !(c.beta > 0)) {
    throw ConfigError("invalid LDA configuration");
  }
}

}  // namespace

TopicModel TopicModel::fit(
    const std::vector<std::vector<std::string>>& documents,
    const LdaConfig& config, std::uint64_t seed) {
  check_config(config);
  if (documents.empty()) throw ConfigError("LDA needs a non-empty corpus");
  TopicModel tm;
  tm.config_ = config;
  std::set<std::string> vocab;
  for (const auto& d : documents) vocab.insert(d.begin(), d.end());
  tm.words_.assign(vocab.begin(), vocab.end());
  for (std::size_t i = 0; i < tm.words_.size(); ++i) {
    tm.word_index_.emplace(tm.words_[i], static_cast<int>(i));
  }
  const int K = config.topics;
  const int V = static_cast<int>(tm.words_.size());
  const double vbeta = V * config.beta;

  std::vector<std::vector<int>> docs;
  for (const auto& d : documents) {
    std::vector<int> ids;
    for (const auto& t : d) ids.push_back(tm.word_index_.at(t));
    docs.push_back(std::move(ids));
  }

  Rng rng(derive_seed(seed, "lda"));
  std::uniform_int_distribution<int> any_topic(0, K - 1);
  tm.topic_word_ = nn::Matrix::Zero(K, V);
  tm.topic_total_.assign(K, 0.0);
  std::vector<std::vector<int>> doc_topic(docs.size(), std::vector<int>(K, 0));
  tm.z_.resize(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (int w : docs[d]) {
      const int k = any_topic(rng);
      tm.z_[d].push_back(k);
      ++doc_topic[d][k];
      tm.topic_word_(k, w) += 1;
      tm.topic_total_[k] += 1;
    }
  }

  std::vector<double> weights(K);
  for (int it = 0; it < config.iterations; ++it) {
    for (std::size_t d = 0; d < docs.size(); ++d) {
      for (std::size_t i = 0; i < docs[d].size(); ++i) {
        const int w = docs[d][i];
        int k = tm.z_[d][i];
        --doc_topic[d][k];
        tm.topic_word_(k, w) -= 1;
        tm.topic_total_[k] -= 1;
        double total = 0;
        for (int t = 0; t < K; ++t) {
          weights[t] = (doc_topic[d][t] + config.alpha) *
                       (tm.topic_word_(t, w) + config.beta) /
                       (tm.topic_total_[t] + vbeta);
          total += weights[t];
        }
        k = sample_topic(weights, total, rng);
        tm.z_[d][i] = k;
        ++doc_topic[d][k];
        tm.topic_word_(k, w) += 1;
        tm.topic_total_[k] += 1;
      }
    }
  }
  for (std::size_t d = 0; d < docs.size(); ++d) {
    tm.theta_.push_back(normalized_theta(doc_topic[d], docs[d].size(), config));
  }
  return tm;
}

TopicModel fit_lda(const std::vector<std::vector<std::string>>& documents,
                   const LdaConfig& config, std::uint64_t seed) {
  return TopicModel::fit(documents, config, seed);
}

TopicModel TopicModel::from_counts(const LdaConfig& config,
                                   std::vector<std::string> words,
                                   nn::Matrix topic_word) {
  check_config(config);
  if (topic_word.rows() != config.topics ||
      topic_word.cols() != static_cast<Eigen::Index>(words.size())) {
    throw ShapeError("topic-word counts do not match the configuration");
  }
  TopicModel tm;
  tm.config_ = config;
  tm.words_ = std::move(words);
  for (std::size_t i = 0; i < tm.words_.size(); ++i) {
    tm.word_index_.emplace(tm.words_[i], static_cast<int>(i));
  }
  tm.topic_word_ = std::move(topic_word);
  tm.topic_total_.resize(config.topics);
  for (int k = 0; k < config.topics; ++k) {
    tm.topic_total_[k] = tm.topic_word_.row(k).sum();
  }
  return tm;
}

std::vector<double> TopicModel::infer(const std::vector<std::string>& document,
                                      std::uint64_t seed) const {
  const int K = config_.topics;
  const double vbeta = static_cast<double>(words_.size()) * config_.beta;
  std::vector<int> ids;
  for (const auto& t : document) {
    auto it = word_index_.find(t);
    if (it != word_index_.end()) ids.push_back(it->second);
  }
  Rng rng(derive_seed(seed, "lda-fold-in"));
  std::uniform_int_distribution<int> any_topic(0, K - 1);
  std::vector<int> doc_topic(K, 0);
  std::vector<int> z;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    z.push_back(any_topic(rng));
    ++doc_topic[z.back()];
  }
  std::vector<double> weights(K);
  for (int it = 0; it < config_.fold_in_iterations; ++it) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      --doc_topic[z[i]];
      double total = 0;
      for (int t = 0; t < K; ++t) {
        weights[t] = (doc_topic[t] + config_.alpha) *
                     (topic_word_(t, ids[i]) + config_.beta) /
                     (topic_total_[t] + vbeta);
        total += weights[t];
      }
      z[i] = sample_topic(weights, total, rng);
      ++doc_topic[z[i]];
    }
  }
  return normalized_theta(doc_topic, ids.size(), config_);
}

std::array<int, 3> TopicModel::top_topics(const std::vector<double>& dist) {
  if (dist.size() < 3) throw ConfigError("need at least 3 topics");
  std::vector<int> order(dist.size());
  for (std::size_t k = 0; k < dist.size(); ++k) order[k] = static_cast<int>(k);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dist[a] > dist[b]; });
  return {order[0], order[1], order[2]};
}

namespace {

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

HinIndex HinIndex::build(const corpus::Repository& repo,
                         std::span<const int> mashups,
                         const std::vector<std::vector<int>>& mashup_topics,
                         const std::vector<std::vector<int>>& service_topics) {
  if (mashup_topics.size() != mashups.size() ||
      service_topics.size() != static_cast<std::size_t>(repo.num_services())) {
    throw ShapeError("topic lists do not match the indexed entities");
  }
  HinIndex idx;
  idx.repo_ = &repo;
  auto tag_id = [&](const std::string& t) {
    return idx.tag_ids_.emplace(t, static_cast<int>(idx.tag_ids_.size()))
        .first->second;
  };
  for (int s = 0; s < repo.num_services(); ++s) {
    const auto& svc = repo.service(s);
    idx.service_topics_.push_back(sorted_unique(service_topics[s]));
    std::vector<int> tags;
    for (const auto& t : svc.tags) tags.push_back(tag_id(t));
    idx.service_tags_.push_back(sorted_unique(tags));
    idx.service_provider_.push_back(
        idx.provider_ids_
            .emplace(svc.provider, static_cast<int>(idx.provider_ids_.size()))
            .first->second);
  }
  for (std::size_t i = 0; i < mashups.size(); ++i) {
    const int m = mashups[i];
    const auto& mashup = repo.mashup(m);
    MashupNode node;
    node.topics = sorted_unique(mashup_topics[i]);
    for (const auto& t : mashup.tags) node.tags.push_back(tag_id(t));
    node.tags = sorted_unique(node.tags);
    node.services = sorted_unique(mashup.components);
    for (int s : node.services) {
      node.service_topics.insert(node.service_topics.end(),
                                 idx.service_topics_[s].begin(),
                                 idx.service_topics_[s].end());
      node.service_tags.insert(node.service_tags.end(),
                               idx.service_tags_[s].begin(),
                               idx.service_tags_[s].end());
      node.service_providers.push_back(idx.service_provider_[s]);
    }
    node.service_topics = sorted_unique(node.service_topics);
    node.service_tags = sorted_unique(node.service_tags);
    node.service_providers = sorted_unique(node.service_providers);
    idx.slot_.emplace(m, static_cast<int>(idx.nodes_.size()));
    idx.mashups_.push_back(m);
    idx.nodes_.push_back(std::move(node));
  }
  return idx;
}

const MashupNode& HinIndex::node(int mashup) const {
  auto it = slot_.find(mashup);
  if (it == slot_.end()) {
    throw Error("mashup index " + std::to_string(mashup) + " is not indexed");
  }
  return nodes_[it->second];
}

MashupNode HinIndex::node_for(const TargetState& target) const {
  MashupNode node;
  node.topics = sorted_unique(target.topics);
  // Tags unknown to the index still count towards the set size; they get
  // ids that cannot collide with indexed tags.
  int unknown = -1;
  std::set<std::string> uniq(target.tags.begin(), target.tags.end());
  for (const auto& t : uniq) {
    auto it = tag_ids_.find(t);
    node.tags.push_back(it == tag_ids_.end() ? unknown-- : it->second);
  }
  node.tags = sorted_unique(node.tags);
  node.services = sorted_unique(target.selected);
  for (int s : node.services) {
    node.service_topics.insert(node.service_topics.end(),
                               service_topics_.at(s).begin(),
                               service_topics_.at(s).end());
    node.service_tags.insert(node.service_tags.end(),
                             service_tags_.at(s).begin(),
                             service_tags_.at(s).end());
    node.service_providers.push_back(service_provider_.at(s));
  }
  node.service_topics = sorted_unique(node.service_topics);
  node.service_tags = sorted_unique(node.service_tags);
  node.service_providers = sorted_unique(node.service_providers);
  return node;
}

double dice(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::size_t i = 0, j = 0, common = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++common;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return 2.0 * static_cast<double>(common) /
         static_cast<double>(a.size() + b.size());
}

double metapath_sim(const MashupNode& a, const MashupNode& b, int path) {
  switch (path) {
    case 1: return dice(a.topics, b.topics);
    case 2: return dice(a.tags, b.tags);
    case 3: return dice(a.services, b.services);
    case 4: return dice(a.service_topics, b.service_topics);
    case 5: return dice(a.service_tags, b.service_tags);
    case 6: return dice(a.service_providers, b.service_providers);
    default:
      throw ConfigError("meta-path id must be in 1..6, got " +
                        std::to_string(path));
  }
}

double metapath_sim(const HinIndex& index, int m1, int m2, int path) {
  return metapath_sim(index.node(m1), index.node(m2), path);
}

std::array<double, kNumMetaPaths> similarity_profile(const MashupNode& a,
                                                     const MashupNode& b) {
  std::array<double, kNumMetaPaths> sims{};
  for (int p = 1; p <= kNumMetaPaths; ++p) sims[p - 1] = metapath_sim(a, b, p);
  return sims;
}

double overall_sim(const std::array<double, kNumMetaPaths>& sims,
                   const std::array<double, kNumMetaPaths>& weights) {
  double total = 0;
  for (int p = 0; p < kNumMetaPaths; ++p) total += weights[p] * sims[p];
  return total;
}

std::vector<Neighbor> find_neighbors(const HinIndex& index,
                                     const TargetState& target, int k) {
  std::vector<Neighbor> all;
  if (index.mashups().empty() || k <= 0) return all;
  const MashupNode tnode = index.node_for(target);
  for (int m : index.mashups()) {
    if (target.self && *target.self == m) continue;
    all.push_back({m, overall_sim(similarity_profile(tnode, index.node(m)))});
  }
  const auto* repo = index.repository();
  std::sort(all.begin(), all.end(), [&](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return repo->mashup(a.mashup).id < repo->mashup(b.mashup).id;
  });
  if (static_cast<int>(all.size()) > k) all.resize(k);
  return all;
}

TargetEmbedding target_embedding(const std::vector<Neighbor>& neighbors,
                                 const corpus::Repository& repo,
                                 const graph::NodeEmbedding& embeddings,
                                 bool normalize) {
  TargetEmbedding out;
  out.vector = nn::Vector::Zero(embeddings.dim());
  if (neighbors.empty()) {
    out.empty_neighborhood = true;
    return out;
  }
  double total = 0;
  for (const auto& n : neighbors) {
    out.vector += n.similarity * embeddings.at(repo.mashup(n.mashup).id);
    total += n.similarity;
  }
  if (normalize && total > 0) out.vector /= total;
  return out;
}

}  // namespace bundlerec::hin

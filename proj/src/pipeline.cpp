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

#include "bundlerec/pipeline.hpp"

#include <algorithm>
#include <set>

namespace bundlerec::pipeline {

using model::Network;
using model::NetworkConfig;
using model::Strategy;
using model::Variant;

nlohmann::json FeatureConfig::to_json() const {
  return {{"text",
           {{"seq_len", text.seq_len},
            {"embed_dim", text.embed_dim},
            {"windows", text.windows},
            {"channels", text.channels},
            {"seq_out", text.seq_out}}},
          {"lda",
           {{"topics", lda.topics},
            {"iterations", lda.iterations},
            {"alpha", lda.alpha},
            {"beta", lda.beta},
            {"fold_in_iterations", lda.fold_in_iterations}}},
          {"walk",
           {{"p", walk.p},
            {"q", walk.q},
            {"walk_length", walk.walk_length},
            {"walks_per_node", walk.walks_per_node},
            {"window", walk.window},
            {"negatives", walk.negatives},
            {"dim", walk.dim},
            {"epochs", walk.epochs},
            {"learning_rate", walk.learning_rate}}},
          {"k_neighbors", k_neighbors},
          {"normalize_vm", normalize_vm}};
}

FeatureConfig FeatureConfig::from_json(const nlohmann::json& j) {
  FeatureConfig c;
  const auto& t = j.at("text");
  c.text.seq_len = t.at("seq_len").get<int>();
  c.text.embed_dim = t.at("embed_dim").get<int>();
  c.text.windows = t.at("windows").get<std::vector<int>>();
  c.text.channels = t.at("channels").get<int>();
  c.text.seq_out = t.at("seq_out").get<int>();
  const auto& l = j.at("lda");
  c.lda.topics = l.at("topics").get<int>();
  c.lda.iterations = l.at("iterations").get<int>();
  c.lda.alpha = l.at("alpha").get<double>();
  c.lda.beta = l.at("beta").get<double>();
  c.lda.fold_in_iterations = l.at("fold_in_iterations").get<int>();
  const auto& w = j.at("walk");
  c.walk.p = w.at("p").get<double>();
  c.walk.q = w.at("q").get<double>();
  c.walk.walk_length = w.at("walk_length").get<int>();
  c.walk.walks_per_node = w.at("walks_per_node").get<int>();
  c.walk.window = w.at("window").get<int>();
  c.walk.negatives = w.at("negatives").get<int>();
  c.walk.dim = w.at("dim").get<int>();
  c.walk.epochs = w.at("epochs").get<int>();
  c.walk.learning_rate = w.at("learning_rate").get<double>();
  c.k_neighbors = j.at("k_neighbors").get<int>();
  c.normalize_vm = j.at("normalize_vm").get<bool>();
  return c;
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"features", features.to_json()},
          {"sampling",
           {{"neg_ratio", sampling.neg_ratio},
            {"ss_sizes", sampling.ss_sizes},
            {"subset_cap", sampling.subset_cap}}},
          {"train", train.to_json()}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.features = FeatureConfig::from_json(j.at("features"));
  const auto& s = j.at("sampling");
  c.sampling.neg_ratio = s.at("neg_ratio").get<int>();
  c.sampling.ss_sizes = s.at("ss_sizes").get<std::vector<int>>();
  c.sampling.subset_cap = s.at("subset_cap").get<int>();
  c.train = model::TrainConfig::from_json(j.at("train"));
  return c;
}

std::uint64_t repository_fingerprint(const corpus::Repository& repo) {
  std::uint64_t h = fnv1a("bundlerec-repository");
  for (const auto& s : repo.services()) h = fnv1a(s.id + '\n', h);
  h = fnv1a("--\n", h);
  for (const auto& m : repo.mashups()) h = fnv1a(m.id + '\n', h);
  return h;
}

namespace {

std::vector<int> top3(const std::vector<double>& dist) {
  auto t = hin::TopicModel::top_topics(dist);
  return {t.begin(), t.end()};
}

Matrix topics_matrix(const std::vector<std::vector<int>>& topics) {
  Matrix m(3, static_cast<Eigen::Index>(topics.size()));
  for (std::size_t i = 0; i < topics.size(); ++i) {
    for (int k = 0; k < 3; ++k) m(k, static_cast<Eigen::Index>(i)) = topics[i][k];
  }
  return m;
}

std::vector<std::vector<int>> topics_from(const Matrix& m) {
  std::vector<std::vector<int>> out(m.cols());
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    for (int k = 0; k < 3; ++k) out[i].push_back(static_cast<int>(m(k, i)));
  }
  return out;
}

}  // namespace

FoldFeatures FoldFeatures::build(const corpus::Repository& repo,
                                 const corpus::FoldSplit& fold,
                                 const FeatureConfig& config,
                                 std::uint64_t seed) {
  if (fold.train.empty()) throw ConfigError("fold has no training mashups");
  FoldFeatures f;
  f.repo_ = &repo;
  f.config_ = config;
  f.seed_ = seed;
  f.fold_index_ = fold.index;
  f.train_ = fold.train;
  std::sort(f.train_.begin(), f.train_.end());
  f.vocab_ = text::build_vocab(repo, f.train_);

  std::vector<std::vector<std::string>> docs;
  for (const auto& s : repo.services()) docs.push_back(s.description);
  for (int m : f.train_) docs.push_back(repo.mashup(m).description);
  f.lda_ = hin::fit_lda(docs, config.lda, derive_seed(seed, "lda"));
  const auto& dist = f.lda_.distributions();
  for (int s = 0; s < repo.num_services(); ++s) {
    f.service_topics_.push_back(top3(dist[s]));
  }
  f.mashup_topics_.resize(repo.num_mashups());
  for (std::size_t i = 0; i < f.train_.size(); ++i) {
    f.mashup_topics_[f.train_[i]] = top3(dist[repo.num_services() + i]);
  }
  for (int m = 0; m < repo.num_mashups(); ++m) {
    if (!f.mashup_topics_[m].empty()) continue;
    f.mashup_topics_[m] = top3(f.lda_.infer(
        repo.mashup(m).description,
        derive_seed(seed, "fold-in/" + repo.mashup(m).id)));
  }

  auto matrix = corpus::build_invocation_matrix(repo, f.train_);
  auto bg = graph::build_graph(repo, matrix, f.train_);
  auto walks = graph::biased_walks(bg.graph, config.walk,
                                   derive_seed(seed, "walks"));
  f.nodes_ = graph::skipgram_train(bg.graph, walks, config.walk,
                                   derive_seed(seed, "skipgram"))
                 .embedding;
  f.derive_tables();
  return f;
}

void FoldFeatures::derive_tables() {
  const auto& repo = *repo_;
  std::vector<std::vector<int>> train_topics;
  for (int m : train_) train_topics.push_back(mashup_topics_.at(m));
  index_ = hin::HinIndex::build(repo, train_, train_topics, service_topics_);
  service_emb_.resize(nodes_.dim(), repo.num_services());
  for (int s = 0; s < repo.num_services(); ++s) {
    service_emb_.col(s) = nodes_.at(repo.service(s).id);
  }
  service_inputs_.clear();
  mashup_inputs_.clear();
  for (const auto& s : repo.services()) {
    service_inputs_.push_back(text::make_content_input(
        s.description, s.tags, vocab_, config_.text.seq_len));
  }
  for (const auto& m : repo.mashups()) {
    mashup_inputs_.push_back(text::make_content_input(
        m.description, m.tags, vocab_, config_.text.seq_len));
  }
  memo_ = std::make_shared<Memo>();
}

void FoldFeatures::store(Checkpoint& ckpt) const {
  std::vector<std::string> train_ids;
  for (int m : train_) train_ids.push_back(repo_->mashup(m).id);
  ckpt.manifest["features"] = {
      {"config", config_.to_json()},
      {"seed", seed_},
      {"fold", fold_index_},
      {"repository", hex64(repository_fingerprint(*repo_))},
      {"train", train_ids},
      {"vocab", vocab_.words()},
      {"lda_words", lda_.words()},
      {"node_ids", nodes_.ids}};
  ckpt.put("features/lda.topic_word", lda_.topic_word());
  ckpt.put("features/node.vectors", nodes_.vectors);
  ckpt.put("features/mashup_topics", topics_matrix(mashup_topics_));
  ckpt.put("features/service_topics", topics_matrix(service_topics_));
}

FoldFeatures FoldFeatures::restore(const Checkpoint& ckpt,
                                   const corpus::Repository& repo) {
  if (!ckpt.manifest.contains("features")) {
    throw IntegrityError("checkpoint carries no feature tables");
  }
  const auto& j = ckpt.manifest.at("features");
  if (j.at("repository").get<std::string>() !=
      hex64(repository_fingerprint(repo))) {
    throw IntegrityError(
        "checkpoint was built on a different repository (entity ids differ)");
  }
  FoldFeatures f;
  f.repo_ = &repo;
  f.config_ = FeatureConfig::from_json(j.at("config"));
  f.seed_ = j.at("seed").get<std::uint64_t>();
  f.fold_index_ = j.at("fold").get<int>();
  for (const auto& id : j.at("train").get<std::vector<std::string>>()) {
    auto idx = repo.mashup_index(id);
    if (!idx) throw IntegrityError("unknown training mashup " + id);
    f.train_.push_back(*idx);
  }
  f.vocab_ = text::Vocab::from_tokens(
      j.at("vocab").get<std::vector<std::string>>());
  f.lda_ = hin::TopicModel::from_counts(
      f.config_.lda, j.at("lda_words").get<std::vector<std::string>>(),
      ckpt.get("features/lda.topic_word"));
  f.nodes_.ids = j.at("node_ids").get<std::vector<std::string>>();
  f.nodes_.vectors = ckpt.get("features/node.vectors");
  if (static_cast<std::size_t>(f.nodes_.vectors.cols()) != f.nodes_.ids.size()) {
    throw ShapeError("node embedding count does not match node ids");
  }
  for (std::size_t i = 0; i < f.nodes_.ids.size(); ++i) {
    f.nodes_.index.emplace(f.nodes_.ids[i], static_cast<int>(i));
  }
  f.mashup_topics_ = topics_from(ckpt.get("features/mashup_topics"));
  f.service_topics_ = topics_from(ckpt.get("features/service_topics"));
  if (static_cast<int>(f.mashup_topics_.size()) != repo.num_mashups() ||
      static_cast<int>(f.service_topics_.size()) != repo.num_services()) {
    throw ShapeError("topic tables do not match the repository");
  }
  f.derive_tables();
  return f;
}

std::uint64_t FoldFeatures::fingerprint() const {
  Checkpoint c;
  store(c);
  return c.hash();
}

text::ContentInput FoldFeatures::requirement_input(
    const std::vector<std::string>& tokens,
    const std::vector<std::string>& tags) const {
  return text::make_content_input(tokens, tags, vocab_, config_.text.seq_len);
}

std::vector<int> FoldFeatures::infer_topics(
    const std::vector<std::string>& tokens) const {
  std::string joined;
  for (const auto& t : tokens) joined += t + ' ';
  return top3(lda_.infer(tokens, derive_seed(seed_, "fold-in-text/" + joined)));
}

hin::TargetState FoldFeatures::mashup_target(
    int mashup, std::span<const int> selected) const {
  hin::TargetState t;
  t.topics = mashup_topics_.at(mashup);
  t.tags = repo_->mashup(mashup).tags;
  t.selected.assign(selected.begin(), selected.end());
  if (is_train(mashup)) t.self = mashup;
  return t;
}

hin::TargetEmbedding FoldFeatures::embed_target(
    const hin::TargetState& target) const {
  auto neighbors = hin::find_neighbors(index_, target, config_.k_neighbors);
  return hin::target_embedding(neighbors, *repo_, nodes_,
                               config_.normalize_vm);
}

Vector FoldFeatures::mashup_vm(int mashup,
                               std::span<const int> selected) const {
  std::vector<int> key(selected.begin(), selected.end());
  std::sort(key.begin(), key.end());
  {
    std::lock_guard lock(memo_->mu);
    auto it = memo_->vm.find({mashup, key});
    if (it != memo_->vm.end()) return it->second;
  }
  Vector v = embed_target(mashup_target(mashup, selected)).vector;
  std::lock_guard lock(memo_->mu);
  memo_->vm.emplace(std::make_pair(mashup, std::move(key)), v);
  return v;
}

FoldFeatures FoldFeatures::with_neighbors(int k) const {
  if (k < 1) throw ConfigError("neighbor count must be >= 1");
  FoldFeatures f = *this;
  f.config_.k_neighbors = k;
  f.memo_ = std::make_shared<Memo>();
  return f;
}

model::Batch FoldFeatures::make_batch(std::span<const corpus::Sample> samples,
                                      const NetworkConfig& net) const {
  model::Batch batch;
  for (const auto& s : samples) batch.labels.push_back(s.label);
  if (net.has_content()) {
    std::map<int, int> mcol, scol;
    auto service_col = [&](int s) {
      auto [it, inserted] =
          scol.emplace(s, static_cast<int>(batch.entities.size()));
      if (inserted) batch.entities.push_back(&service_inputs_.at(s));
      return it->second;
    };
    for (const auto& s : samples) {
      auto [it, inserted] =
          mcol.emplace(s.mashup, static_cast<int>(batch.entities.size()));
      if (inserted) batch.entities.push_back(&mashup_inputs_.at(s.mashup));
      std::vector<int> sel;
      for (int x : s.selected) sel.push_back(service_col(x));
      batch.content.push(it->second, std::move(sel), service_col(s.candidate));
    }
  }
  if (net.has_invocation()) {
    const int S = repo_->num_services();
    std::map<std::pair<int, std::vector<int>>, int> target_col;
    std::vector<Vector> targets;
    for (const auto& s : samples) {
      std::vector<int> key = s.selected;
      std::sort(key.begin(), key.end());
      auto [it, inserted] = target_col.emplace(
          std::make_pair(s.mashup, std::move(key)),
          S + static_cast<int>(targets.size()));
      if (inserted) targets.push_back(mashup_vm(s.mashup, s.selected));
      batch.invocation.push(it->second, s.selected, s.candidate);
    }
    batch.invocation_table.resize(service_emb_.rows(),
                                  S + static_cast<int>(targets.size()));
    batch.invocation_table.leftCols(S) = service_emb_;
    for (std::size_t k = 0; k < targets.size(); ++k) {
      batch.invocation_table.col(S + k) = targets[k];
    }
  }
  return batch;
}

std::uint64_t fold_seed(std::uint64_t root, int fold_index) {
  return derive_seed(root, "fold/" + std::to_string(fold_index));
}

namespace {

NetworkConfig network_config(const FoldFeatures& features, Variant variant,
                             Strategy strategy) {
  NetworkConfig c;
  c.variant = variant;
  c.strategy = strategy;
  c.vocab_size = features.vocab().size();
  c.text = features.config().text;
  c.node_dim = features.config().walk.dim;
  return c;
}

corpus::FoldSplit train_split(const FoldFeatures& features) {
  corpus::FoldSplit split;
  split.index = features.fold_index();
  split.train = features.train_mashups();
  return split;
}

struct SampleSets {
  std::vector<corpus::Sample> warm;
  std::vector<corpus::Sample> cold;
};

SampleSets training_samples(const FoldFeatures& features,
                            const PipelineConfig& config, std::uint64_t seed) {
  const auto split = train_split(features);
  SampleSets sets;
  sets.warm = corpus::generate_samples(features.repo(), split,
                                       corpus::Purpose::kTrain,
                                       config.sampling,
                                       derive_seed(seed, "samples"));
  corpus::SamplingConfig cold = config.sampling;
  cold.ss_sizes = {0};
  sets.cold = corpus::generate_samples(features.repo(), split,
                                       corpus::Purpose::kTrain, cold,
                                       derive_seed(seed, "samples-cold"));
  return sets;
}

std::string init_label(Variant v, Strategy s, bool cold) {
  return to_string(v) + "/" + (cold ? std::string("cold") : to_string(s));
}

}  // namespace

TrainedModel train_separate_model(const FoldFeatures& features,
                                  Variant variant, Strategy strategy,
                                  const PipelineConfig& config,
                                  std::uint64_t seed) {
  if (variant == Variant::kHisr) {
    throw ConfigError("HISR is trained from FISR and NISR models");
  }
  TrainedModel tm;
  tm.variant = variant;
  tm.strategy = strategy;
  const auto samples = training_samples(features, config, seed);
  for (bool cold : {false, true}) {
    const std::string label = init_label(variant, strategy, cold);
    NetworkConfig nc =
        network_config(features, variant, cold ? Strategy::kNone : strategy);
    Rng rng(derive_seed(seed, label + "/init"));
    Network net(nc, rng);
    model::BatchFactory factory = [&](std::span<const corpus::Sample> s) {
      return features.make_batch(s, nc);
    };
    const auto& set = cold ? samples.cold : samples.warm;
    auto trace = model::train_separate(net, set, factory, config.train,
                                       derive_seed(seed, label + "/train"));
    tm.traces[cold ? "cold" : "warm"] = {{"samples", set.size()},
                                         {"training", model::to_json(trace)}};
    (cold ? tm.cold : tm.warm) = std::move(net);
  }
  return tm;
}

TrainedModel train_hybrid_model(const FoldFeatures& features,
                                const TrainedModel& fisr,
                                const TrainedModel& nisr,
                                const PipelineConfig& config,
                                std::uint64_t seed) {
  if (fisr.variant != Variant::kFisr || nisr.variant != Variant::kNisr) {
    throw IntegrityError("hybrid training needs one FISR and one NISR model");
  }
  if (fisr.strategy != nisr.strategy) {
    throw IntegrityError("FISR and NISR models use different strategies");
  }
  TrainedModel tm;
  tm.variant = Variant::kHisr;
  tm.strategy = fisr.strategy;
  const auto samples = training_samples(features, config, seed);
  for (bool cold : {false, true}) {
    const std::string label = init_label(Variant::kHisr, tm.strategy, cold);
    NetworkConfig nc = network_config(features, Variant::kHisr,
                                      cold ? Strategy::kNone : tm.strategy);
    Rng rng(derive_seed(seed, label + "/init"));
    Network net(nc, rng);
    net.import_underlying(cold ? fisr.cold : fisr.warm);
    net.import_underlying(cold ? nisr.cold : nisr.warm);
    model::BatchFactory factory = [&](std::span<const corpus::Sample> s) {
      return features.make_batch(s, nc);
    };
    const auto& set = cold ? samples.cold : samples.warm;
    auto trace = model::train_hybrid(net, set, factory, config.train,
                                     derive_seed(seed, label + "/train"));
    tm.traces[cold ? "cold" : "warm"] = {{"samples", set.size()},
                                         {"training", model::to_json(trace)}};
    (cold ? tm.cold : tm.warm) = std::move(net);
  }
  return tm;
}

Checkpoint to_checkpoint(const ModelBundle& bundle) {
  Checkpoint ckpt;
  const auto& m = bundle.model;
  ckpt.manifest = {{"format", "bundlerec-model"},
                   {"variant", to_string(m.variant)},
                   {"strategy", to_string(m.strategy)},
                   {"seed", bundle.seed},
                   {"config", bundle.config.to_json()},
                   {"network",
                    {{"warm", m.warm.config().to_json()},
                     {"cold", m.cold.config().to_json()}}},
                   {"traces", m.traces}};
  bundle.features.store(ckpt);
  m.warm.save(ckpt, "warm/");
  m.cold.save(ckpt, "cold/");
  return ckpt;
}

ModelBundle from_checkpoint(const Checkpoint& ckpt,
                            const corpus::Repository& repo) {
  if (ckpt.manifest.value("format", "") != "bundlerec-model") {
    throw IntegrityError("not a bundlerec model checkpoint");
  }
  ModelBundle b;
  b.seed = ckpt.manifest.at("seed").get<std::uint64_t>();
  b.config = PipelineConfig::from_json(ckpt.manifest.at("config"));
  b.features = FoldFeatures::restore(ckpt, repo);
  b.model.variant =
      model::parse_variant(ckpt.manifest.at("variant").get<std::string>());
  b.model.strategy =
      model::parse_strategy(ckpt.manifest.at("strategy").get<std::string>());
  b.model.traces = ckpt.manifest.at("traces");
  Rng unused(0);
  const auto& nets = ckpt.manifest.at("network");
  b.model.warm = Network(NetworkConfig::from_json(nets.at("warm")), unused);
  b.model.warm.load(ckpt, "warm/");
  b.model.cold = Network(NetworkConfig::from_json(nets.at("cold")), unused);
  b.model.cold.load(ckpt, "cold/");
  return b;
}

std::vector<int> candidate_pool(int num_services,
                                std::span<const int> selected) {
  std::set<int> chosen(selected.begin(), selected.end());
  std::vector<int> pool;
  for (int s = 0; s < num_services; ++s) {
    if (!chosen.count(s)) pool.push_back(s);
  }
  return pool;
}

Scorer::Scorer(const Network& net, const FoldFeatures& features)
    : net_(&net), features_(&features) {
  if (net.extractor) {
    const int S = features.repo().num_services();
    std::vector<const text::ContentInput*> inputs;
    for (int s = 0; s < S; ++s) inputs.push_back(&features.service_input(s));
    service_content_ = net.extractor->apply(inputs);
  }
}

Scorer::Query Scorer::mashup_query(int mashup,
                                   std::span<const int> selected) const {
  return {features_->mashup_input(mashup),
          features_->mashup_target(mashup, selected),
          {selected.begin(), selected.end()}};
}

Scorer::Query Scorer::requirement_query(
    const std::vector<std::string>& tokens,
    const std::vector<std::string>& tags,
    std::span<const int> selected) const {
  Query q;
  q.content = features_->requirement_input(tokens, tags);
  q.target.topics = features_->infer_topics(tokens);
  q.target.tags = tags;
  q.target.selected.assign(selected.begin(), selected.end());
  q.selected.assign(selected.begin(), selected.end());
  return q;
}

std::vector<double> Scorer::score(
    const Query& query, std::span<const int> pool,
    std::vector<std::vector<double>>* weights) const {
  if (pool.empty()) return {};
  const int S = features_->repo().num_services();
  model::Batch batch;
  Matrix content_table;
  if (net_->content) {
    const text::ContentInput* in = &query.content;
    content_table.resize(service_content_.rows(), S + 1);
    content_table.leftCols(S) = service_content_;
    content_table.col(S) =
        net_->extractor->apply(std::span<const text::ContentInput* const>(&in, 1))
            .col(0);
    batch.content_features = &content_table;
    for (int s : pool) batch.content.push(S, query.selected, s);
  }
  if (net_->invocation) {
    batch.invocation_table.resize(features_->service_embeddings().rows(), S + 1);
    batch.invocation_table.leftCols(S) = features_->service_embeddings();
    batch.invocation_table.col(S) =
        features_->embed_target(query.target).vector;
    for (int s : pool) batch.invocation.push(S, query.selected, s);
  }
  batch.labels.assign(pool.size(), 0);
  Vector pred;
  if (weights) {
    Network::Cache cache;
    pred = net_->forward(batch, cache);
    weights->clear();
    for (std::size_t b = 0; b < pool.size(); ++b) {
      weights->push_back(net_->attention_weights(cache, static_cast<int>(b)));
    }
  } else {
    pred = net_->predict(batch);
  }
  return {pred.data(), pred.data() + pred.size()};
}

Ranking Scorer::rank(const Query& query, std::span<const int> pool,
                     int n) const {
  std::vector<std::vector<double>> weights;
  auto scores = score(query, pool, &weights);
  std::vector<std::string> ids;
  for (int s : pool) ids.push_back(features_->repo().service(s).id);
  Ranking out;
  for (const auto& r : model::rank_by_score(scores, ids, n)) {
    out.items.push_back({pool[r.index], r.score});
  }
  if (!out.items.empty() && !query.selected.empty()) {
    const auto top = std::find(pool.begin(), pool.end(), out.items[0].service);
    out.attention = weights[top - pool.begin()];
  }
  return out;
}

}  // namespace bundlerec::pipeline

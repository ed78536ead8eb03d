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

#include "bundlerec/training.hpp"

#include <algorithm>
#include <numeric>

namespace bundlerec::model {

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"patience", patience},
          {"min_improvement", min_improvement},
          {"batch_size", batch_size},
          {"lr", lr},
          {"finetune_lr_scale", finetune_lr_scale},
          {"finetune_epochs", finetune_epochs}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.min_improvement = j.at("min_improvement").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.finetune_lr_scale = j.at("finetune_lr_scale").get<double>();
  c.finetune_epochs = j.at("finetune_epochs").get<int>();
  return c;
}

nlohmann::json to_json(const TrainTrace& t) {
  return {{"epoch_loss", t.epoch_loss}, {"stopped_early", t.stopped_early}};
}

nlohmann::json to_json(const HybridTrace& t) {
  return {{"phase_a", to_json(t.phase_a)}, {"phase_b", to_json(t.phase_b)}};
}

namespace {

void validate(const TrainConfig& c) {
  if (c.epochs < 1 || c.batch_size < 1 || !(c.lr > 0) || c.patience < 1 ||
      c.finetune_epochs < 0 || !(c.finetune_lr_scale > 0)) {
    throw ConfigError("invalid training configuration");
  }
}

// Runs epochs of `step(begin, end)` over a shuffled order, with early
// stopping on the mean loss.
template <typename Step>
TrainTrace run_epochs(std::size_t n, const TrainConfig& config, int epochs,
                      std::uint64_t seed, Step&& step) {
  TrainTrace trace;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "shuffle"));
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t lo = 0; lo < n; lo += config.batch_size) {
      const std::size_t hi = std::min(n, lo + config.batch_size);
      total += step(std::span<const std::size_t>(order.data() + lo, hi - lo)) *
               static_cast<double>(hi - lo);
    }
    const double loss = total / static_cast<double>(n);
    trace.epoch_loss.push_back(loss);
    if (loss < best * (1.0 - config.min_improvement)) {
      best = loss;
      stale = 0;
    } else if (++stale >= config.patience) {
      trace.stopped_early = epoch + 1 < epochs;
      break;
    }
  }
  return trace;
}

}  // namespace

TrainTrace train_network(Network& net, std::span<const corpus::Sample> samples,
                         const BatchFactory& make_batch,
                         const TrainConfig& config, double lr, int epochs,
                         std::uint64_t seed) {
  validate(config);
  if (samples.empty()) throw ConfigError("cannot train on an empty sample set");
  nn::Adam adam({.lr = lr});
  nn::ParamRefs params = net.params();
  std::vector<corpus::Sample> block;
  Network::Cache cache;
  return run_epochs(samples.size(), config, epochs, seed,
                    [&](std::span<const std::size_t> idx) {
                      block.clear();
                      for (auto i : idx) block.push_back(samples[i]);
                      Batch batch = make_batch(block);
                      nn::zero_grads(params);
                      Vector pred = net.forward(batch, cache);
                      const double loss = net.backward(batch, cache, pred);
                      adam.step(params);
                      return loss;
                    });
}

TrainTrace train_separate(Network& net,
                          std::span<const corpus::Sample> samples,
                          const BatchFactory& make_batch,
                          const TrainConfig& config, std::uint64_t seed) {
  if (net.config().variant == Variant::kHisr) {
    throw ConfigError("train_separate takes a FISR or NISR network");
  }
  return train_network(net, samples, make_batch, config, config.lr,
                       config.epochs, derive_seed(seed, "separate"));
}

HybridTrace train_hybrid(Network& net, std::span<const corpus::Sample> samples,
                         const BatchFactory& make_batch,
                         const TrainConfig& config, std::uint64_t seed) {
  validate(config);
  if (net.config().variant != Variant::kHisr) {
    throw ConfigError("train_hybrid takes a HISR network");
  }
  if (samples.empty()) throw ConfigError("cannot train on an empty sample set");
  HybridTrace trace;

  // Phase A: with the pathways frozen their interaction vectors are fixed,
  // so compute them once and train only the head.
  nn::ParamRefs underlying = net.underlying_params();
  nn::set_frozen(underlying, true);
  const std::size_t n = samples.size();
  Matrix inter(net.interaction_dim(), static_cast<Eigen::Index>(n));
  std::vector<int> labels(n);
  for (std::size_t lo = 0; lo < n; lo += config.batch_size) {
    const std::size_t hi = std::min(n, lo + config.batch_size);
    Batch batch = make_batch(samples.subspan(lo, hi - lo));
    inter.middleCols(lo, hi - lo) = net.interaction(batch);
    for (std::size_t i = lo; i < hi; ++i) labels[i] = samples[i].label;
  }
  {
    nn::Adam adam({.lr = config.lr});
    nn::ParamRefs head = net.head_params();
    Network::HeadCache cache;
    Matrix x;
    std::vector<int> y;
    trace.phase_a = run_epochs(
        n, config, config.epochs, derive_seed(seed, "hybrid-a"),
        [&](std::span<const std::size_t> idx) {
          x.resize(inter.rows(), static_cast<Eigen::Index>(idx.size()));
          y.resize(idx.size());
          for (std::size_t k = 0; k < idx.size(); ++k) {
            x.col(k) = inter.col(idx[k]);
            y[k] = labels[idx[k]];
          }
          nn::zero_grads(head);
          Vector pred = net.head_forward(x, cache);
          const double loss = net.head_backward(cache, pred, y, nullptr);
          adam.step(head);
          return loss;
        });
  }
  nn::set_frozen(underlying, false);

  if (config.finetune_epochs > 0) {
    trace.phase_b = train_network(net, samples, make_batch, config,
                                  config.lr * config.finetune_lr_scale,
                                  config.finetune_epochs,
                                  derive_seed(seed, "hybrid-b"));
  }
  return trace;
}

std::vector<Ranked> rank_by_score(std::span<const double> scores,
                                  std::span<const std::string> ids, int n) {
  if (scores.size() != ids.size()) {
    throw ShapeError("score and id counts differ");
  }
  std::vector<Ranked> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = {static_cast<int>(i), scores[i]};
  }
  std::sort(out.begin(), out.end(), [&](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return ids[a.index] < ids[b.index];
  });
  if (n >= 0 && static_cast<int>(out.size()) > n) out.resize(n);
  return out;
}

}  // namespace bundlerec::model

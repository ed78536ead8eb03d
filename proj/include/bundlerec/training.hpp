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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bundlerec/corpus.hpp"
#include "bundlerec/network.hpp"
#include "json.hpp"

namespace bundlerec::model {

struct TrainConfig {
  int epochs = 10;
  // Stop after this many epochs without a relative loss drop of
  // `min_improvement`.
  int patience = 2;
  double min_improvement = 1e-4;
  int batch_size = 64;
  double lr = 3e-4;
  // Hybrid fine-tuning runs at lr * finetune_lr_scale.
  double finetune_lr_scale = 0.1;
  int finetune_epochs = 3;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainTrace {
  std::vector<double> epoch_loss;  // mean training loss per epoch
  bool stopped_early = false;
};

struct HybridTrace {
  TrainTrace phase_a;  // underlying modules frozen
  TrainTrace phase_b;  // everything fine-tuned
};

nlohmann::json to_json(const TrainTrace& t);
nlohmann::json to_json(const HybridTrace& t);

// Turns a block of samples into one batch, labels included.
using BatchFactory = std::function<Batch(std::span<const corpus::Sample>)>;

// Mini-batch Adam over `samples` with a seeded shuffle per epoch.
TrainTrace train_network(Network& net, std::span<const corpus::Sample> samples,
                         const BatchFactory& make_batch,
                         const TrainConfig& config, double lr, int epochs,
                         std::uint64_t seed);

// FISR or NISR end to end.
TrainTrace train_separate(Network& net,
                          std::span<const corpus::Sample> samples,
                          const BatchFactory& make_batch,
                          const TrainConfig& config, std::uint64_t seed);

// `net` is a HISR network already initialized from trained FISR and NISR
// parameters. Phase A trains the integration head on frozen interaction
// vectors, phase B fine-tunes everything at the reduced rate.
HybridTrace train_hybrid(Network& net, std::span<const corpus::Sample> samples,
                         const BatchFactory& make_batch,
                         const TrainConfig& config, std::uint64_t seed);

struct Ranked {
  int index = 0;  // position in the scored pool
  double score = 0.0;
};

// Descending by score, ties by ascending id, truncated to `n`.
std::vector<Ranked> rank_by_score(std::span<const double> scores,
                                  std::span<const std::string> ids, int n);

}  // namespace bundlerec::model

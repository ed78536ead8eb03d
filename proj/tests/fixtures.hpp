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

#include <string>
#include <vector>

#include "bundlerec/corpus.hpp"
#include "bundlerec/pipeline.hpp"

namespace bundlerec::testing {

inline corpus::Service service(const std::string& id, const std::string& text,
                               std::vector<std::string> tags,
                               const std::string& provider) {
  corpus::Service s;
  s.id = id;
  s.name = "Service " + id;
  s.raw_description = text;
  s.description = corpus::tokenize(text);
  s.tags = corpus::normalize_tags(tags);
  s.provider = provider;
  return s;
}

inline corpus::Mashup mashup(const std::string& id, const std::string& text,
                             std::vector<std::string> tags,
                             std::vector<std::string> components) {
  corpus::Mashup m;
  m.id = id;
  m.name = "Mashup " + id;
  m.raw_description = text;
  m.description = corpus::tokenize(text);
  m.tags = corpus::normalize_tags(tags);
  m.component_service_ids = std::move(components);
  return m;
}

// Small synthetic corpus, cheap enough for unit tests.
inline corpus::Repository small_repo(std::uint64_t seed = 11) {
  corpus::SynthConfig c;
  c.n_mashups = 40;
  c.n_services = 20;
  c.vocab_size = 120;
  c.n_tags = 12;
  c.n_providers = 5;
  c.seed = seed;
  return corpus::synth_corpus(c);
}

// Scaled-down pipeline: tiny text CNN, short LDA and walks, few epochs.
inline pipeline::PipelineConfig small_config() {
  pipeline::PipelineConfig c;
  c.features.text.seq_len = 12;
  c.features.text.embed_dim = 8;
  c.features.text.windows = {2, 3};
  c.features.text.channels = 4;
  c.features.text.seq_out = 6;
  c.features.lda.topics = 6;
  c.features.lda.iterations = 30;
  c.features.lda.fold_in_iterations = 10;
  c.features.walk.walks_per_node = 4;
  c.features.walk.epochs = 2;
  c.features.walk.dim = 6;
  c.features.k_neighbors = 5;
  c.sampling.neg_ratio = 4;
  c.sampling.subset_cap = 2;
  c.train.epochs = 2;
  c.train.finetune_epochs = 1;
  c.train.batch_size = 32;
  c.train.lr = 3e-3;
  return c;
}

// HISR bundle trained on every mashup of `repo` with the small config.
inline pipeline::ModelBundle small_hisr_bundle(const corpus::Repository& repo,
                                               std::uint64_t seed = 5) {
  auto config = small_config();
  auto split = corpus::full_split(repo);
  auto features = pipeline::FoldFeatures::build(repo, split, config.features, seed);
  auto fisr = pipeline::train_separate_model(features, model::Variant::kFisr,
                                             model::Strategy::kAttention, config, seed);
  auto nisr = pipeline::train_separate_model(features, model::Variant::kNisr,
                                             model::Strategy::kAttention, config, seed);
  return {pipeline::train_hybrid_model(features, fisr, nisr, config, seed), features,
          config, seed};
}

}  // namespace bundlerec::testing

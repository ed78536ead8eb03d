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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bundlerec/common.hpp"

namespace bundlerec::corpus {

// Lowercases, splits on non-alphanumeric runs, drops tokens shorter than two
// characters.
std::vector<std::string> tokenize(std::string_view text);

// Lowercased, sorted, unique, empty entries removed.
std::vector<std::string> normalize_tags(const std::vector<std::string>& tags);

struct Service {
  std::string id;
  std::string name;
  std::string raw_description;
  std::vector<std::string> description;  // tokenized
  std::vector<std::string> tags;         // sorted, unique
  std::string provider;
};

struct Mashup {
  std::string id;
  std::string name;
  std::string raw_description;
  std::vector<std::string> description;  // tokenized requirements
  std::vector<std::string> tags;         // sorted, unique
  std::vector<std::string> component_service_ids;
  std::vector<int> components;  // service indices, same order as the ids
};

struct DropReport {
  std::vector<std::string> services_without_content;
  std::vector<std::string> mashups_without_content;
  std::vector<std::string> mashups_single_component;

  std::size_t total() const {
    return services_without_content.size() + mashups_without_content.size() +
           mashups_single_component.size();
  }
};

// Immutable validated collection of services and mashups. Entities are
// addressed by dense indices in load order.
class Repository {
 public:
  Repository() = default;

  // Applies the content and component filters, resolves component ids and
  // rejects duplicate or dangling ids.
  static Repository build(std::vector<Service> services,
                          std::vector<Mashup> mashups,
                          DropReport* report = nullptr);

  const std::vector<Service>& services() const { return services_; }
  const std::vector<Mashup>& mashups() const { return mashups_; }
  const Service& service(int i) const { return services_.at(i); }
  const Mashup& mashup(int i) const { return mashups_.at(i); }
  int num_services() const { return static_cast<int>(services_.size()); }
  int num_mashups() const { return static_cast<int>(mashups_.size()); }

  std::optional<int> service_index(std::string_view id) const;
  std::optional<int> mashup_index(std::string_view id) const;

 private:
  std::vector<Service> services_;
  std::vector<Mashup> mashups_;
  std::unordered_map<std::string, int> service_by_id_;
  std::unordered_map<std::string, int> mashup_by_id_;
};

// Reads `services.jsonl` and `mashups.jsonl` from `dir`.
Repository load_repository(const std::filesystem::path& dir,
                           DropReport* report = nullptr);
void save_repository(const Repository& repo, const std::filesystem::path& dir);

// Sparse binary mashup x service matrix.
class InvocationMatrix {
 public:
  InvocationMatrix() = default;
  InvocationMatrix(int num_mashups, int num_services);

  void set(int mashup, int service);
  bool at(int mashup, int service) const;
  const std::vector<int>& services_of(int mashup) const {
    return by_mashup_.at(mashup);
  }
  const std::vector<int>& mashups_of(int service) const {
    return by_service_.at(service);
  }
  int num_mashups() const { return static_cast<int>(by_mashup_.size()); }
  int num_services() const { return static_cast<int>(by_service_.size()); }
  std::size_t ones() const { return ones_; }
  double density() const;

 private:
  std::vector<std::vector<int>> by_mashup_;   // sorted
  std::vector<std::vector<int>> by_service_;  // sorted
  std::size_t ones_ = 0;
};

InvocationMatrix build_invocation_matrix(const Repository& repo);
// Only the rows of `mashups` are populated; other rows stay empty.
InvocationMatrix build_invocation_matrix(const Repository& repo,
                                         std::span<const int> mashups);

struct FoldSplit {
  int index = 0;
  std::vector<int> train;  // mashup indices, ascending
  std::vector<int> test;
};

std::vector<FoldSplit> make_folds(const Repository& repo, int k,
                                  std::uint64_t seed);
// Every mashup in train, empty test. Used for serving models.
FoldSplit full_split(const Repository& repo);

enum class Purpose { kTrain, kTest };

struct Sample {
  int mashup = 0;
  std::vector<int> selected;  // in selection order
  int candidate = 0;
  int label = 0;
};

struct SamplingConfig {
  int neg_ratio = 12;
  std::vector<int> ss_sizes{0, 1, 2, 3};
  int subset_cap = 5;
};

std::vector<Sample> generate_samples(const Repository& repo,
                                     const FoldSplit& fold, Purpose purpose,
                                     const SamplingConfig& config,
                                     std::uint64_t seed);

// Debug dump: `mashup_id, [sel1 sel2], candidate_id, label` per line.
void write_samples(std::ostream& out, const Repository& repo,
                   std::span<const Sample> samples);

struct SynthConfig {
  int n_mashups = 200;
  int n_services = 80;
  int vocab_size = 500;
  int n_tags = 30;
  int n_providers = 10;
  std::uint64_t seed = 7;
};

// Clustered synthetic corpus: services share vocabulary, tags and providers
// within latent clusters; each service has complement partners that
// mashups tend to pull in together.
Repository synth_corpus(const SynthConfig& config);

// Latent cluster of each service index as produced by synth_corpus for the
// same config.
std::vector<int> synth_service_clusters(const SynthConfig& config);

}  // namespace bundlerec::corpus

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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "bundlerec/corpus.hpp"

namespace bundlerec::corpus {

namespace {

constexpr const char* kConsonants = "bdfgklmnprstvz";
constexpr const char* kVowels = "aeiou";

// Pronounceable, unique, alphanumeric pseudo-word for an index.
std::string pseudo_word(int index) {
  const int nc = 14, nv = 5, syllables = nc * nv;
  std::string word;
  int n = index;
  int count = 2;
  int span = syllables * syllables;
  while (n >= span) {
    n -= span;
    ++count;
    span *= syllables;
  }
  for (int i = 0; i < count; ++i) {
    int syl = n % syllables;
    n /= syllables;
    word.push_back(kConsonants[syl / nv]);
    word.push_back(kVowels[syl % nv]);
  }
  return word;
}

int cluster_count(int n_services) {
  return std::clamp(n_services / 10, 1, 12);
}

struct Layout {
  int clusters;
  std::vector<std::string> words;
  std::vector<std::vector<int>> cluster_words;  // indices into words
  std::vector<int> general_words;
  std::vector<std::vector<std::string>> cluster_tags;
  std::vector<std::string> providers;
  std::vector<std::vector<int>> cluster_providers;
};

Layout make_layout(const SynthConfig& cfg) {
  Layout lay;
  lay.clusters = cluster_count(cfg.n_services);
  for (int i = 0; i < cfg.vocab_size; ++i) lay.words.push_back(pseudo_word(i));

  const int general = std::max(1, cfg.vocab_size / 5);
  const int per_cluster =
      std::max(1, (cfg.vocab_size - general) / lay.clusters);
  lay.cluster_words.resize(lay.clusters);
  for (int c = 0; c < lay.clusters; ++c) {
    for (int j = 0; j < per_cluster; ++j) {
      lay.cluster_words[c].push_back((c * per_cluster + j) % cfg.vocab_size);
    }
  }
  for (int j = 0; j < general; ++j) {
    lay.general_words.push_back(cfg.vocab_size - 1 - j);
  }

  lay.cluster_tags.resize(lay.clusters);
  for (int t = 0; t < cfg.n_tags; ++t) {
    int c = t % lay.clusters;
    const auto& slice = lay.cluster_words[c];
    const std::string& tag = lay.words[slice[(t / lay.clusters) % slice.size()]];
    auto& tags = lay.cluster_tags[c];
    if (std::find(tags.begin(), tags.end(), tag) == tags.end()) {
      tags.push_back(tag);
    }
  }
  for (auto& tags : lay.cluster_tags) {
    if (tags.empty()) tags.push_back(lay.words[0]);
  }

  lay.cluster_providers.resize(lay.clusters);
  for (int p = 0; p < cfg.n_providers; ++p) {
    lay.providers.push_back("prov" + pseudo_word(p));
    lay.cluster_providers[p % lay.clusters].push_back(p);
  }
  for (int c = 0; c < lay.clusters; ++c) {
    if (lay.cluster_providers[c].empty()) {
      lay.cluster_providers[c].push_back(c % cfg.n_providers);
    }
  }
  return lay;
}

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
  return items[d(rng)];
}

double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

int pick_weighted(const std::vector<int>& items,
                  const std::vector<double>& weight, Rng& rng) {
  double total = 0;
  for (int i : items) total += weight[i];
  double u = uniform01(rng) * total;
  for (int i : items) {
    u -= weight[i];
    if (u <= 0) return i;
  }
  return items.back();
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

}  // namespace

std::vector<int> synth_service_clusters(const SynthConfig& config) {
  std::vector<int> clusters(config.n_services);
  const int c = cluster_count(config.n_services);
  for (int i = 0; i < config.n_services; ++i) clusters[i] = i % c;
  return clusters;
}

Repository synth_corpus(const SynthConfig& cfg) {
  if (cfg.n_mashups <= 0 || cfg.n_services <= 0 || cfg.vocab_size <= 0 ||
      cfg.n_tags <= 0 || cfg.n_providers <= 0) {
    throw ConfigError("synthetic corpus sizes must be positive");
  }
  if (cfg.vocab_size < cfg.n_tags) {
    throw ConfigError("vocab_size must be at least n_tags");
  }
  if (cfg.n_services < 2) {
    throw ConfigError("need at least two services to form mashups");
  }
  Rng rng(derive_seed(cfg.seed, "synth"));
  const Layout lay = make_layout(cfg);
  const int C = lay.clusters;
  const std::vector<int> cluster_of = synth_service_clusters(cfg);

  std::vector<std::vector<int>> members(C);
  for (int s = 0; s < cfg.n_services; ++s) members[cluster_of[s]].push_back(s);

  // Popularity: Zipf-like weight over a random rank within the cluster.
  std::vector<double> popularity(cfg.n_services);
  for (auto& mem : members) {
    std::vector<int> ranks(mem.size());
    std::iota(ranks.begin(), ranks.end(), 1);
    std::shuffle(ranks.begin(), ranks.end(), rng);
    for (std::size_t i = 0; i < mem.size(); ++i) {
      popularity[mem[i]] = 1.0 / std::pow(ranks[i], 0.8);
    }
  }

  std::vector<Service> services;
  std::vector<std::vector<int>> signature(cfg.n_services);
  for (int s = 0; s < cfg.n_services; ++s) {
    const int c = cluster_of[s];
    for (int j = 0; j < 3; ++j) {
      signature[s].push_back(pick(lay.cluster_words[c], rng));
    }
    std::uniform_int_distribution<int> len(6, 14);
    std::vector<std::string> tokens;
    for (int n = len(rng); n > 0; --n) {
      double u = uniform01(rng);
      int w;
      if (u < 0.35) {
        w = pick(signature[s], rng);
      } else if (u < 0.75) {
        w = pick(lay.cluster_words[c], rng);
      } else {
        w = pick(lay.general_words, rng);
      }
      tokens.push_back(lay.words[w]);
    }
    Service svc;
    svc.id = "s" + std::to_string(s);
    svc.name = "svc-" + lay.words[signature[s][0]];
    svc.raw_description = join(tokens);
    std::uniform_int_distribution<int> ntags(1, 3);
    for (int n = ntags(rng); n > 0; --n) {
      svc.tags.push_back(pick(lay.cluster_tags[c], rng));
    }
    int provider = uniform01(rng) < 0.8
                       ? pick(lay.cluster_providers[c], rng)
                       : std::uniform_int_distribution<int>(
                             0, cfg.n_providers - 1)(rng);
    svc.provider = lay.providers[provider];
    services.push_back(std::move(svc));
  }

  // Complement partners: one in the own cluster, two in the next cluster.
  std::vector<std::vector<int>> partners(cfg.n_services);
  for (int s = 0; s < cfg.n_services; ++s) {
    const int c = cluster_of[s];
    std::vector<int> own;
    for (int o : members[c]) {
      if (o != s) own.push_back(o);
    }
    if (!own.empty()) partners[s].push_back(pick_weighted(own, popularity, rng));
    const auto& next = members[(c + 1) % C];
    for (int j = 0; j < 2; ++j) {
      int p = pick_weighted(next, popularity, rng);
      if (p != s && std::find(partners[s].begin(), partners[s].end(), p) ==
                        partners[s].end()) {
        partners[s].push_back(p);
      }
    }
  }

  std::vector<Mashup> mashups;
  for (int m = 0; m < cfg.n_mashups; ++m) {
    const int c = std::uniform_int_distribution<int>(0, C - 1)(rng);
    const int partner_cluster = (c + 1) % C;
    double u = uniform01(rng);
    int size = u < 0.45 ? 2 : (u < 0.8 ? 3 : 4);
    size = std::min(size, cfg.n_services);

    std::vector<int> comps{pick_weighted(members[c], popularity, rng)};
    int guard = 0;
    while (static_cast<int>(comps.size()) < size && guard++ < 1000) {
      int next;
      if (uniform01(rng) < 0.75) {
        int anchor = pick(comps, rng);
        if (partners[anchor].empty()) continue;
        next = pick(partners[anchor], rng);
      } else {
        const auto& pool = uniform01(rng) < 0.5 ? members[c]
                                                : members[partner_cluster];
        next = pick_weighted(pool, popularity, rng);
      }
      if (std::find(comps.begin(), comps.end(), next) == comps.end()) {
        comps.push_back(next);
      }
    }

    std::uniform_int_distribution<int> len(6, 14);
    std::vector<std::string> tokens;
    for (int n = len(rng); n > 0; --n) {
      double v = uniform01(rng);
      int w;
      if (v < 0.45) {
        w = pick(lay.cluster_words[c], rng);
      } else if (v < 0.65) {
        w = pick(lay.cluster_words[partner_cluster], rng);
      } else if (v < 0.75) {
        w = pick(signature[comps[0]], rng);
      } else {
        w = pick(lay.general_words, rng);
      }
      tokens.push_back(lay.words[w]);
    }

    Mashup mashup;
    mashup.id = "m" + std::to_string(m);
    mashup.name = "app-" + lay.words[pick(lay.cluster_words[c], rng)];
    mashup.raw_description = join(tokens);
    std::set<std::string> tag_pool;
    for (int s : comps) {
      tag_pool.insert(services[s].tags.begin(), services[s].tags.end());
    }
    std::vector<std::string> pool(tag_pool.begin(), tag_pool.end());
    std::uniform_int_distribution<int> ntags(1, 3);
    for (int n = ntags(rng); n > 0; --n) mashup.tags.push_back(pick(pool, rng));
    for (int s : comps) mashup.component_service_ids.push_back(services[s].id);
    mashups.push_back(std::move(mashup));
  }
  return Repository::build(std::move(services), std::move(mashups));
}

}  // namespace bundlerec::corpus

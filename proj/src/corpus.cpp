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

#include "bundlerec/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>

#include "json.hpp"

namespace bundlerec::corpus {

using nlohmann::json;

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.size() >= 2) tokens.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::vector<std::string> normalize_tags(const std::vector<std::string>& tags) {
  std::set<std::string> out;
  for (const auto& t : tags) {
    std::string lowered;
    for (char ch : t) {
      lowered.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    if (!lowered.empty()) out.insert(lowered);
  }
  return {out.begin(), out.end()};
}

Repository Repository::build(std::vector<Service> services,
                             std::vector<Mashup> mashups, DropReport* report) {
  DropReport local;
  DropReport& drops = report ? *report : local;
  drops = DropReport{};

  Repository repo;
  std::set<std::string> seen_services;
  std::set<std::string> dropped_services;
  for (auto& s : services) {
    if (!seen_services.insert(s.id).second) {
      throw IntegrityError("duplicate service id: " + s.id);
    }
    if (s.description.empty()) s.description = tokenize(s.raw_description);
    if (s.description.empty()) {
      drops.services_without_content.push_back(s.id);
      dropped_services.insert(s.id);
      continue;
    }
    s.tags = normalize_tags(s.tags);
    repo.service_by_id_.emplace(s.id, static_cast<int>(repo.services_.size()));
    repo.services_.push_back(std::move(s));
  }

  std::set<std::string> seen_mashups;
  for (auto& m : mashups) {
    if (!seen_mashups.insert(m.id).second) {
      throw IntegrityError("duplicate mashup id: " + m.id);
    }
    std::vector<std::string> ids;
    std::vector<int> idx;
    std::set<std::string> uniq;
    for (const auto& sid : m.component_service_ids) {
      if (!uniq.insert(sid).second) continue;
      auto it = repo.service_by_id_.find(sid);
      if (it == repo.service_by_id_.end()) {
        // Components removed by the content filter disappear silently; any
        // other unknown id is a broken reference.
        if (dropped_services.count(sid)) continue;
        throw IntegrityError("mashup " + m.id +
                             " references unknown service id: " + sid);
      }
      ids.push_back(sid);
      idx.push_back(it->second);
    }
    if (m.description.empty()) m.description = tokenize(m.raw_description);
    if (m.description.empty()) {
      drops.mashups_without_content.push_back(m.id);
      continue;
    }
    if (idx.size() < 2) {
      drops.mashups_single_component.push_back(m.id);
      continue;
    }
    m.component_service_ids = std::move(ids);
    m.components = std::move(idx);
    m.tags = normalize_tags(m.tags);
    repo.mashup_by_id_.emplace(m.id, static_cast<int>(repo.mashups_.size()));
    repo.mashups_.push_back(std::move(m));
  }
  return repo;
}

std::optional<int> Repository::service_index(std::string_view id) const {
  auto it = service_by_id_.find(std::string(id));
  if (it == service_by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> Repository::mashup_index(std::string_view id) const {
  auto it = mashup_by_id_.find(std::string(id));
  if (it == mashup_by_id_.end()) return std::nullopt;
  return it->second;
}

namespace {

template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
    try {
      fn(rec);
    } catch (const json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
}

std::vector<std::string> string_list(const json& rec, const char* key) {
  if (!rec.contains(key)) return {};
  return rec.at(key).get<std::vector<std::string>>();
}

}  // namespace

Repository load_repository(const std::filesystem::path& dir,
                           DropReport* report) {
  std::vector<Service> services;
  for_each_record(dir / "services.jsonl", [&](const json& rec) {
    Service s;
    s.id = rec.at("id").get<std::string>();
    s.name = rec.value("name", std::string{});
    s.raw_description = rec.at("description").get<std::string>();
    s.tags = string_list(rec, "tags");
    s.provider = rec.value("provider", std::string{});
    services.push_back(std::move(s));
  });
  std::vector<Mashup> mashups;
  for_each_record(dir / "mashups.jsonl", [&](const json& rec) {
    Mashup m;
    m.id = rec.at("id").get<std::string>();
    m.name = rec.value("name", std::string{});
    m.raw_description = rec.at("description").get<std::string>();
    m.tags = string_list(rec, "tags");
    m.component_service_ids = string_list(rec, "component_service_ids");
    mashups.push_back(std::move(m));
  });
  return Repository::build(std::move(services), std::move(mashups), report);
}

void save_repository(const Repository& repo, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "services.jsonl", std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / "services.jsonl").string());
    for (const auto& s : repo.services()) {
      json rec = {{"id", s.id},
                  {"name", s.name},
                  {"description", s.raw_description},
                  {"tags", s.tags},
                  {"provider", s.provider}};
      out << rec.dump() << '\n';
    }
  }
  std::ofstream out(dir / "mashups.jsonl", std::ios::binary);
  if (!out) throw Error("cannot write " + (dir / "mashups.jsonl").string());
  for (const auto& m : repo.mashups()) {
    json rec = {{"id", m.id},
                {"name", m.name},
                {"description", m.raw_description},
                {"tags", m.tags},
                {"component_service_ids", m.component_service_ids}};
    out << rec.dump() << '\n';
  }
}

InvocationMatrix::InvocationMatrix(int num_mashups, int num_services)
    : by_mashup_(num_mashups), by_service_(num_services) {}

void InvocationMatrix::set(int mashup, int service) {
  auto& row = by_mashup_.at(mashup);
  auto it = std::lower_bound(row.begin(), row.end(), service);
  if (it != row.end() && *it == service) return;
  row.insert(it, service);
  auto& col = by_service_.at(service);
  col.insert(std::lower_bound(col.begin(), col.end(), mashup), mashup);
  ++ones_;
}

bool InvocationMatrix::at(int mashup, int service) const {
  const auto& row = by_mashup_.at(mashup);
  return std::binary_search(row.begin(), row.end(), service);
}

double InvocationMatrix::density() const {
  double cells = static_cast<double>(by_mashup_.size()) *
                 static_cast<double>(by_service_.size());
  return cells == 0 ? 0.0 : static_cast<double>(ones_) / cells;
}

InvocationMatrix build_invocation_matrix(const Repository& repo) {
  std::vector<int> all(repo.num_mashups());
  std::iota(all.begin(), all.end(), 0);
  return build_invocation_matrix(repo, all);
}

InvocationMatrix build_invocation_matrix(const Repository& repo,
                                         std::span<const int> mashups) {
  InvocationMatrix mat(repo.num_mashups(), repo.num_services());
  for (int m : mashups) {
    for (int s : repo.mashup(m).components) mat.set(m, s);
  }
  return mat;
}

std::vector<FoldSplit> make_folds(const Repository& repo, int k,
                                  std::uint64_t seed) {
  const int n = repo.num_mashups();
  if (k < 2) throw ConfigError("fold count must be at least 2");
  if (n == 0) throw ConfigError("cannot split an empty repository");
  if (k > n) {
    throw ConfigError("fold count " + std::to_string(k) +
                      " exceeds mashup count " + std::to_string(n));
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "folds"));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<int>> buckets(k);
  for (int i = 0; i < n; ++i) buckets[i % k].push_back(order[i]);

  std::vector<FoldSplit> folds(k);
  for (int f = 0; f < k; ++f) {
    folds[f].index = f;
    folds[f].test = buckets[f];
    std::sort(folds[f].test.begin(), folds[f].test.end());
    for (int g = 0; g < k; ++g) {
      if (g == f) continue;
      folds[f].train.insert(folds[f].train.end(), buckets[g].begin(),
                            buckets[g].end());
    }
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

FoldSplit full_split(const Repository& repo) {
  FoldSplit split;
  split.index = -1;
  split.train.resize(repo.num_mashups());
  std::iota(split.train.begin(), split.train.end(), 0);
  return split;
}

namespace {

void combinations(const std::vector<int>& items, int k, std::size_t start,
                  std::vector<int>& current,
                  std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == k) {
    out.push_back(current);
    return;
  }
  for (std::size_t i = start; i < items.size(); ++i) {
    current.push_back(items[i]);
    combinations(items, k, i + 1, current, out);
    current.pop_back();
  }
}

}  // namespace

std::vector<Sample> generate_samples(const Repository& repo,
                                     const FoldSplit& fold, Purpose purpose,
                                     const SamplingConfig& config,
                                     std::uint64_t seed) {
  for (int size : config.ss_sizes) {
    if (size < 0 || size > 3) {
      throw ConfigError("selected-set sizes must lie in {0,1,2,3}");
    }
  }
  if (config.neg_ratio < 0) throw ConfigError("neg_ratio must be >= 0");
  std::vector<int> sizes = config.ss_sizes;
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

  const auto& mashups = purpose == Purpose::kTrain ? fold.train : fold.test;
  const std::string tag = purpose == Purpose::kTrain ? "train" : "test";
  std::vector<Sample> samples;
  std::set<std::tuple<int, std::vector<int>, int>> seen;
  bool warned = false;

  for (int m : mashups) {
    Rng rng(derive_seed(seed, "samples/" + tag + "/" + repo.mashup(m).id));
    std::vector<int> comps = repo.mashup(m).components;
    std::sort(comps.begin(), comps.end());
    std::vector<int> negatives_pool;
    for (int s = 0; s < repo.num_services(); ++s) {
      if (!std::binary_search(comps.begin(), comps.end(), s)) {
        negatives_pool.push_back(s);
      }
    }
    if (config.neg_ratio > static_cast<int>(negatives_pool.size()) &&
        !warned) {
      warn("neg_ratio " + std::to_string(config.neg_ratio) +
           " exceeds available negatives (" +
           std::to_string(negatives_pool.size()) + ") for mashup " +
           repo.mashup(m).id + "; using all of them");
      warned = true;
    }

    for (int size : sizes) {
      if (size > static_cast<int>(comps.size()) - 1) continue;
      std::vector<std::vector<int>> subsets;
      std::vector<int> cur;
      combinations(comps, size, 0, cur, subsets);
      if (static_cast<int>(subsets.size()) > config.subset_cap) {
        std::vector<std::vector<int>> chosen;
        std::sample(subsets.begin(), subsets.end(), std::back_inserter(chosen),
                    config.subset_cap, rng);
        subsets = std::move(chosen);
      }
      for (auto& subset : subsets) {
        std::vector<int> ordered = subset;
        std::shuffle(ordered.begin(), ordered.end(), rng);
        for (int s : comps) {
          if (std::binary_search(subset.begin(), subset.end(), s)) continue;
          if (seen.emplace(m, subset, s).second) {
            samples.push_back({m, ordered, s, 1});
          }
          std::vector<int> negs;
          std::sample(negatives_pool.begin(), negatives_pool.end(),
                      std::back_inserter(negs),
                      std::min<std::size_t>(config.neg_ratio,
                                            negatives_pool.size()),
                      rng);
          std::shuffle(negs.begin(), negs.end(), rng);
          for (int neg : negs) {
            if (seen.emplace(m, subset, neg).second) {
              samples.push_back({m, ordered, neg, 0});
            }
          }
        }
      }
    }
  }
  return samples;
}

void write_samples(std::ostream& out, const Repository& repo,
                   std::span<const Sample> samples) {
  for (const auto& s : samples) {
    out << repo.mashup(s.mashup).id << ", [";
    for (std::size_t i = 0; i < s.selected.size(); ++i) {
      if (i) out << ' ';
      out << repo.service(s.selected[i]).id;
    }
    out << "], " << repo.service(s.candidate).id << ", " << s.label << '\n';
  }
}

}  // namespace bundlerec::corpus

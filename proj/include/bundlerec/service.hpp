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
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "bundlerec/corpus.hpp"
#include "bundlerec/pipeline.hpp"
#include "json.hpp"

namespace bundlerec::serve {

// Request failure mapped to an HTTP status and an error code.
class ApiError : public Error {
 public:
  ApiError(int status, std::string code, const std::string& message)
      : Error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

// A frozen model bound to its repository; safe to share between threads.
class Recommender {
 public:
  Recommender(const corpus::Repository& repo, pipeline::ModelBundle bundle,
              std::uint64_t checkpoint_hash);
  Recommender(const Recommender&) = delete;
  Recommender& operator=(const Recommender&) = delete;

  static std::shared_ptr<Recommender> load(
      const corpus::Repository& repo, const std::filesystem::path& path);

  const corpus::Repository& repo() const { return *repo_; }
  model::Variant variant() const { return bundle_.model.variant; }
  model::Strategy strategy() const { return bundle_.model.strategy; }
  std::uint64_t checkpoint_hash() const { return hash_; }

  // First round (nothing selected) uses the cold network.
  pipeline::Ranking recommend(const std::vector<std::string>& tokens,
                              const std::vector<std::string>& tags,
                              const std::vector<int>& selected, int n) const;

 private:
  const corpus::Repository* repo_;
  pipeline::ModelBundle bundle_;
  std::uint64_t hash_;
  std::unique_ptr<pipeline::Scorer> warm_;
  std::unique_ptr<pipeline::Scorer> cold_;
};

struct Session {
  std::string id;
  std::string requirements;
  std::vector<std::string> tags;
  std::vector<std::string> tokens;
  std::vector<int> selected;  // selection order
  nlohmann::json history = nlohmann::json::array();
  std::mutex mu;
};

struct HttpResponse {
  int status = 200;
  nlohmann::json body;
};

struct ReplayReport {
  int events = 0;
  int lists_checked = 0;
  std::vector<std::string> mismatches;
};

// Multi-round sessions over a shared Recommender. Sessions live in memory;
// with a log path every successful mutation is appended as one JSON line.
class SessionService {
 public:
  explicit SessionService(int top_n = 10,
                          std::optional<std::filesystem::path> log = {});

  void set_model(std::shared_ptr<const Recommender> model);

  nlohmann::json create_session(const nlohmann::json& request);
  nlohmann::json select(const std::string& id, const nlohmann::json& request);
  nlohmann::json undo(const std::string& id);
  nlohmann::json get(const std::string& id) const;
  nlohmann::json services() const;
  nlohmann::json model_info() const;

  // Routes one request; errors become the {error:{code,message}} envelope.
  HttpResponse handle(const std::string& method, const std::string& path,
                      const std::string& body);

  // Re-executes a log against this service and compares every list and
  // attention vector with the recorded ones.
  ReplayReport replay(const std::filesystem::path& log);

 private:
  std::shared_ptr<const Recommender> require_model() const;
  std::shared_ptr<Session> find(const std::string& id) const;
  nlohmann::json round_view(const Session& s, const Recommender& model,
                            const std::string& action,
                            const std::string& service_id);
  void append_log(const nlohmann::json& event);

  int top_n_;
  std::optional<std::filesystem::path> log_path_;
  std::mutex log_mu_;
  std::ofstream log_;
  mutable std::shared_mutex mu_;
  std::shared_ptr<const Recommender> model_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

// HTTP front end for a SessionService. CORS is open so a browser client on
// another origin can call it.
class HttpServer {
 public:
  explicit HttpServer(SessionService& service);
  ~HttpServer();

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port.
  int start(const std::string& host, int port);
  // Blocks until stop() is called from elsewhere.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace bundlerec::serve

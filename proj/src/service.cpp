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

#include "bundlerec/service.hpp"

#include <condition_variable>
#include <sstream>
#include <thread>

#include "httplib.h"

namespace bundlerec::serve {

using nlohmann::json;

Recommender::Recommender(const corpus::Repository& repo,
                         pipeline::ModelBundle bundle,
                         std::uint64_t checkpoint_hash)
    : repo_(&repo), bundle_(std::move(bundle)), hash_(checkpoint_hash) {
  warm_ = std::make_unique<pipeline::Scorer>(bundle_.model.warm,
                                             bundle_.features);
  cold_ = std::make_unique<pipeline::Scorer>(bundle_.model.cold,
                                             bundle_.features);
}

std::shared_ptr<Recommender> Recommender::load(
    const corpus::Repository& repo, const std::filesystem::path& path) {
  Checkpoint ckpt = Checkpoint::load(path);
  return std::make_shared<Recommender>(
      repo, pipeline::from_checkpoint(ckpt, repo), ckpt.hash());
}

pipeline::Ranking Recommender::recommend(
    const std::vector<std::string>& tokens,
    const std::vector<std::string>& tags, const std::vector<int>& selected,
    int n) const {
  const auto& scorer = selected.empty() ? *cold_ : *warm_;
  auto pool = pipeline::candidate_pool(repo_->num_services(), selected);
  return scorer.rank(scorer.requirement_query(tokens, tags, selected), pool, n);
}

SessionService::SessionService(int top_n,
                               std::optional<std::filesystem::path> log)
    : top_n_(top_n), log_path_(std::move(log)) {
  if (top_n < 1) throw ConfigError("top-n must be >= 1");
  if (log_path_) {
    log_.open(*log_path_, std::ios::app);
    if (!log_) {
      throw Error("cannot open session log " + log_path_->string());
    }
  }
}

void SessionService::set_model(std::shared_ptr<const Recommender> model) {
  std::unique_lock lock(mu_);
  model_ = std::move(model);
}

std::shared_ptr<const Recommender> SessionService::require_model() const {
  std::shared_lock lock(mu_);
  if (!model_) {
    throw ApiError(503, "model_unavailable", "no model is loaded yet");
  }
  return model_;
}

std::shared_ptr<Session> SessionService::find(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    throw ApiError(404, "not_found", "unknown session " + id);
  }
  return it->second;
}

void SessionService::append_log(const json& event) {
  if (!log_path_) return;
  std::lock_guard lock(log_mu_);
  log_ << event.dump() << '\n';
  log_.flush();
}

json SessionService::round_view(const Session& s, const Recommender& model,
                                const std::string& action,
                                const std::string& service_id) {
  auto ranking = model.recommend(s.tokens, s.tags, s.selected, top_n_);
  const auto& repo = model.repo();
  json recs = json::array();
  for (const auto& item : ranking.items) {
    recs.push_back({{"service_id", repo.service(item.service).id},
                    {"name", repo.service(item.service).name},
                    {"score", item.score}});
  }
  json attention = json::array();
  for (std::size_t i = 0; i < ranking.attention.size(); ++i) {
    attention.push_back({{"selected_id", repo.service(s.selected[i]).id},
                         {"weight", ranking.attention[i]}});
  }
  const int round = static_cast<int>(s.selected.size()) + 1;
  json entry = {{"round", round},
                {"action", action},
                {"recommendations", recs},
                {"attention", attention}};
  if (!service_id.empty()) entry["service_id"] = service_id;
  const_cast<Session&>(s).history.push_back(entry);

  json view = {{"session_id", s.id}, {"round", round}, {"recommendations", recs}};
  if (action != "create") view["attention"] = attention;
  return view;
}

namespace {

const json& require_object(const json& request) {
  if (!request.is_object()) {
    throw ApiError(422, "invalid_request", "request body must be a JSON object");
  }
  return request;
}

std::string require_string(const json& request, const char* key) {
  auto it = request.find(key);
  if (it == request.end() || !it->is_string()) {
    throw ApiError(422, "invalid_request",
                   std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

json SessionService::create_session(const json& request) {
  auto model = require_model();
  require_object(request);
  const std::string text = require_string(request, "requirements");
  auto tokens = corpus::tokenize(text);
  if (tokens.empty()) {
    throw ApiError(422, "invalid_request",
                   "requirements must contain at least one word");
  }
  std::vector<std::string> tags;
  if (request.contains("tags")) {
    const auto& t = request.at("tags");
    if (!t.is_array()) {
      throw ApiError(422, "invalid_request", "field 'tags' must be a list");
    }
    for (const auto& x : t) {
      if (!x.is_string()) {
        throw ApiError(422, "invalid_request", "tags must be strings");
      }
      tags.push_back(x.get<std::string>());
    }
  }
  auto session = std::make_shared<Session>();
  session->requirements = text;
  session->tokens = std::move(tokens);
  session->tags = corpus::normalize_tags(tags);
  {
    std::unique_lock lock(mu_);
    std::ostringstream id;
    id << 's' << std::setw(6) << std::setfill('0') << next_id_++;
    session->id = id.str();
  }
  json view;
  {
    std::lock_guard lock(session->mu);
    view = round_view(*session, *model, "create", "");
  }
  {
    std::unique_lock lock(mu_);
    sessions_.emplace(session->id, session);
  }
  append_log({{"op", "create"},
              {"session_id", session->id},
              {"requirements", text},
              {"tags", tags},
              {"result", view}});
  return view;
}

json SessionService::select(const std::string& id, const json& request) {
  auto model = require_model();
  auto session = find(id);
  require_object(request);
  const std::string service_id = require_string(request, "service_id");
  auto idx = model->repo().service_index(service_id);
  if (!idx) {
    throw ApiError(422, "unknown_service", "unknown service " + service_id);
  }
  json view;
  {
    std::lock_guard lock(session->mu);
    for (int s : session->selected) {
      if (s == *idx) {
        throw ApiError(409, "conflict",
                       "service " + service_id + " is already selected");
      }
    }
    session->selected.push_back(*idx);
    try {
      view = round_view(*session, *model, "select", service_id);
    } catch (...) {
      session->selected.pop_back();
      throw;
    }
  }
  append_log({{"op", "select"},
              {"session_id", id},
              {"service_id", service_id},
              {"result", view}});
  return view;
}

json SessionService::undo(const std::string& id) {
  auto model = require_model();
  auto session = find(id);
  json view;
  {
    std::lock_guard lock(session->mu);
    if (session->selected.empty()) {
      throw ApiError(409, "conflict", "nothing to undo");
    }
    const int removed = session->selected.back();
    session->selected.pop_back();
    try {
      view = round_view(*session, *model, "undo",
                        model->repo().service(removed).id);
    } catch (...) {
      session->selected.push_back(removed);
      throw;
    }
  }
  append_log({{"op", "undo"}, {"session_id", id}, {"result", view}});
  return view;
}

json SessionService::get(const std::string& id) const {
  auto model = require_model();
  auto session = find(id);
  std::lock_guard lock(session->mu);
  json selected = json::array();
  for (int s : session->selected) selected.push_back(model->repo().service(s).id);
  return {{"session_id", session->id},
          {"requirements", session->requirements},
          {"tags", session->tags},
          {"selected", selected},
          {"round", static_cast<int>(session->selected.size()) + 1},
          {"history", session->history}};
}

json SessionService::services() const {
  auto model = require_model();
  json list = json::array();
  for (const auto& s : model->repo().services()) {
    list.push_back({{"id", s.id},
                    {"name", s.name},
                    {"provider", s.provider},
                    {"tags", s.tags}});
  }
  return {{"services", list}};
}

json SessionService::model_info() const {
  auto model = require_model();
  return {{"variant", model::to_string(model->variant())},
          {"strategy", model::to_string(model->strategy())},
          {"checkpoint_hash", hex64(model->checkpoint_hash())}};
}

HttpResponse SessionService::handle(const std::string& method,
                                    const std::string& path,
                                    const std::string& body) {
  std::vector<std::string> parts;
  {
    std::string cur;
    for (char c : path) {
      if (c == '/') {
        if (!cur.empty()) parts.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) parts.push_back(cur);
  }
  auto parse_body = [&]() {
    if (body.empty()) return json::object();
    try {
      return json::parse(body);
    } catch (const json::parse_error& e) {
      throw ApiError(400, "invalid_json", std::string("malformed JSON: ") + e.what());
    }
  };
  auto method_not_allowed = [&]() {
    return ApiError(405, "method_not_allowed",
                    method + " is not supported on " + path);
  };
  try {
    if (parts.size() == 1 && parts[0] == "sessions") {
      if (method != "POST") throw method_not_allowed();
      return {201, create_session(parse_body())};
    }
    if (parts.size() == 2 && parts[0] == "sessions") {
      if (method != "GET") throw method_not_allowed();
      return {200, get(parts[1])};
    }
    if (parts.size() == 3 && parts[0] == "sessions" &&
        (parts[2] == "select" || parts[2] == "undo")) {
      if (method != "POST") throw method_not_allowed();
      if (parts[2] == "select") return {200, select(parts[1], parse_body())};
      return {200, undo(parts[1])};
    }
    if (parts.size() == 1 && parts[0] == "services") {
      if (method != "GET") throw method_not_allowed();
      return {200, services()};
    }
    if (parts.size() == 1 && parts[0] == "model") {
      if (method != "GET") throw method_not_allowed();
      return {200, model_info()};
    }
    throw ApiError(404, "not_found", "no route for " + path);
  } catch (const ApiError& e) {
    return {e.status(), {{"error", {{"code", e.code()}, {"message", e.what()}}}}};
  } catch (const std::exception& e) {
    return {500, {{"error", {{"code", "internal"}, {"message", e.what()}}}}};
  }
}

ReplayReport SessionService::replay(const std::filesystem::path& log) {
  std::ifstream in(log);
  if (!in) throw Error("cannot read session log " + log.string());
  ReplayReport report;
  std::map<std::string, std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  auto compare = [&](const json& expected, const json& actual,
                     const std::string& where) {
    for (const char* key : {"recommendations", "attention"}) {
      if (!expected.contains(key)) continue;
      ++report.lists_checked;
      if (!actual.contains(key) || actual.at(key) != expected.at(key)) {
        report.mismatches.push_back(where + ": " + key + " differs");
      }
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json event;
    try {
      event = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(log.string(), line_no, e.what());
    }
    const std::string op = event.at("op").get<std::string>();
    const std::string where = log.string() + ":" + std::to_string(line_no);
    json result;
    if (op == "create") {
      result = create_session({{"requirements", event.at("requirements")},
                               {"tags", event.at("tags")}});
      ids[event.at("session_id").get<std::string>()] =
          result.at("session_id").get<std::string>();
    } else {
      auto it = ids.find(event.at("session_id").get<std::string>());
      if (it == ids.end()) {
        throw ParseError(log.string(), line_no, "event for unknown session");
      }
      if (op == "select") {
        result = select(it->second, {{"service_id", event.at("service_id")}});
      } else if (op == "undo") {
        result = undo(it->second);
      } else {
        throw ParseError(log.string(), line_no, "unknown op " + op);
      }
    }
    ++report.events;
    compare(event.at("result"), result, where);
  }
  return report;
}

struct HttpServer::Impl {
  SessionService* service = nullptr;
  httplib::Server server;
  std::thread thread;
  std::mutex mu;
  std::condition_variable stopped_cv;
  bool stopped = false;
};

HttpServer::HttpServer(SessionService& service)
    : impl_(std::make_unique<Impl>()) {
  impl_->service = &service;
  auto& svr = impl_->server;
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods",
                            "GET, POST, OPTIONS"}});
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    auto out = impl_->service->handle(req.method, req.path, req.body);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  svr.Get(".*", handler);
  svr.Post(".*", handler);
  svr.Put(".*", handler);
  svr.Delete(".*", handler);
  svr.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  auto& svr = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = svr.bind_to_any_port(host);
  } else if (!svr.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  svr.wait_until_ready();
  return bound;
}

void HttpServer::wait() {
  std::unique_lock lock(impl_->mu);
  impl_->stopped_cv.wait(lock, [&] { return impl_->stopped; });
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
  std::lock_guard lock(impl_->mu);
  impl_->stopped = true;
  impl_->stopped_cv.notify_all();
}

}  // namespace bundlerec::serve

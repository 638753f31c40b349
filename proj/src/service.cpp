/*
 * Copyright 2026 The DocFoundry Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "docfoundry/service.hpp"

#include <charconv>
#include <filesystem>

#include <httplib.h>

#include "docfoundry/query.hpp"

namespace docfoundry {

nlohmann::json to_json(const ApiError& e) {
  return {{"status", e.status}, {"code", e.code}, {"message", e.message}, {"detail", e.detail}};
}

ApiError api_error_from_current_exception() {
  try {
    throw;
  } catch (const QuerySyntaxError& e) {
    return {400, e.code(), e.what(), {{"position", e.position()}}};
  } catch (const SchemaError& e) {
    return {400, e.code(), e.what(), to_json(e.report())};
  } catch (const MissingVariableError& e) {
    return {400, e.code(), e.what(), {{"names", e.names()}}};
  } catch (const ExhaustedAttemptsError& e) {
    return {422, e.code(), e.what(), to_json(e.report())};
  } catch (const BackendError& e) {
    nlohmann::json detail = nullptr;
    if (e.http_status() != 0) detail = {{"http_status", e.http_status()}};
    return {502, e.code(), e.what(), detail};
  } catch (const EmptyIndexError& e) {
    return {409, "empty_store", e.what(), nullptr};
  } catch (const Error& e) {
    static const std::map<std::string, int> kStatus = {
        {"invalid_argument", 400}, {"path_not_allowed", 400}, {"store_unavailable", 400}, {"bad_request", 400},
        {"not_found", 404},        {"duplicate", 409},        {"empty_store", 409},       {"session_busy", 429},
    };
    const auto it = kStatus.find(e.code());
    return {it == kStatus.end() ? 500 : it->second, e.code(), e.what(), nullptr};
  } catch (const nlohmann::json::exception& e) {
    return {400, "bad_request", std::string("malformed request body: ") + e.what(), nullptr};
  } catch (const std::exception& e) {
    return {500, "internal", e.what(), nullptr};
  } catch (...) {
    return {500, "internal", "unknown error", nullptr};
  }
}

namespace {

void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const ApiError& e) { send_json(res, to_json(e), e.status); }

nlohmann::json body_object(const httplib::Request& req) {
  if (req.body.empty()) throw Error("bad_request", "request body must be a JSON object");
  auto j = nlohmann::json::parse(req.body);
  if (!j.is_object()) throw Error("bad_request", "request body must be a JSON object");
  return j;
}

std::size_t size_param(const httplib::Request& req, const std::string& name, std::size_t fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string v = req.get_param_value(name);
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw InvalidArgumentError("query parameter '" + name + "' must be a non-negative integer");
  }
  return out;
}

std::optional<std::string> opt_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) throw Error("bad_request", std::string("'") + key + "' must be a string");
  return j[key].get<std::string>();
}

std::string req_string(const nlohmann::json& j, const char* key) {
  auto v = opt_string(j, key);
  if (!v || v->empty()) throw Error("bad_request", std::string("'") + key + "' is required");
  return *v;
}

std::optional<std::size_t> opt_size(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number_unsigned()) throw Error("bad_request", std::string("'") + key + "' must be a non-negative integer");
  return j[key].get<std::size_t>();
}

}  // namespace

struct Service::Impl {
  Engine& engine;
  httplib::Server server;

  explicit Impl(Engine& e) : engine(e) {
    install_auth();
    install_routes();
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      send_error(res, {res.status, res.status == 404 ? "not_found" : "http_error",
                       res.status == 404 ? "no such endpoint" : httplib::status_message(res.status), nullptr});
      return httplib::Server::HandlerResponse::Handled;
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (...) {
        send_error(res, api_error_from_current_exception());
      }
    });
    if (const auto& dir = engine.config().static_dir; dir && std::filesystem::is_directory(*dir)) {
      server.set_mount_point("/", dir->string());
    }
  }

  void install_auth() {
    server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      const auto& token = engine.config().token;
      if (!token || !req.path.starts_with("/api/")) return httplib::Server::HandlerResponse::Unhandled;
      if (req.get_header_value("Authorization") == "Bearer " + *token) {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      send_error(res, {401, "unauthorized", "missing or invalid bearer token", nullptr});
      return httplib::Server::HandlerResponse::Handled;
    });
  }

  template <typename F>
  static httplib::Server::Handler guarded(F&& f) {
    return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (...) {
        send_error(res, api_error_from_current_exception());
      }
    };
  }

  void install_routes() {
    server.Post("/api/ingest", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = body_object(req);
      const std::string path = req_string(body, "path");
      std::vector<std::string> globs;
      if (body.contains("globs") && !body["globs"].is_null()) globs = body["globs"].get<std::vector<std::string>>();
      const StoreKind kind = parse_store_kind(opt_string(body, "store").value_or("dual"));
      send_json(res, to_json(engine.ingest(path, globs, kind, true)));
    }));

    server.Get("/api/search", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string q = req.get_param_value("q");
      if (q.empty()) throw InvalidArgumentError("query parameter 'q' is required");
      std::optional<SearchMode> mode;
      if (req.has_param("mode")) mode = parse_search_mode(req.get_param_value("mode"));
      send_json(res, engine.search(q, size_param(req, "k", 10), mode, size_param(req, "page", 0)));
    }));

    server.Post("/api/ask", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = body_object(req);
      std::optional<SearchMode> mode;
      if (auto m = opt_string(body, "mode")) mode = parse_search_mode(*m);
      send_json(res, engine.ask(req_string(body, "question"), opt_size(body, "k").value_or(4), mode));
    }));

    server.Post("/api/prompt", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, engine.prompt(req_string(body_object(req), "prompt")));
    }));

    server.Post("/api/chat", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = body_object(req);
      const auto reply = engine.chat(opt_string(body, "session_id"), req_string(body, "message"));
      send_json(res, {{"session_id", reply.session_id}, {"reply", reply.reply}});
    }));

    server.Get(R"(/api/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, to_json(engine.session(req.matches[1].str())));
    }));

    server.Post("/api/extract", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = body_object(req);
      if (!body.contains("schema")) throw Error("bad_request", "'schema' is required");
      const RecordSchema schema = schema_from_json(body["schema"]);
      const UnitKind unit = parse_unit_kind(opt_string(body, "unit").value_or("sentence"));
      const bool attempt_fix = body.value("attempt_fix", false);
      send_json(res, engine.extract(req_string(body, "doc_id"), unit, schema, req_string(body, "template"), attempt_fix));
    }));

    server.Get(R"(/api/extract/([^/]+)/csv)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      res.set_content(engine.job_csv(req.matches[1].str()), "text/csv; charset=utf-8");
    }));

    server.Post("/api/summarize", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = body_object(req);
      send_json(res, engine.summarize(req_string(body, "doc_id"), opt_string(body, "concept"), opt_size(body, "budget")));
    }));

    server.Get("/api/documents", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, {{"documents", engine.documents()}});
    }));

    server.Delete(R"(/api/documents/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1].str();
      engine.delete_document(id);
      send_json(res, {{"deleted", id}});
    }));

    server.Get("/api/health", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, engine.health());
    }));
  }
};

Service::Service(Engine& engine) : impl_(std::make_unique<Impl>(engine)) {}
Service::~Service() { stop(); }

bool Service::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }
int Service::bind_any(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool Service::listen() { return impl_->server.listen_after_bind(); }
void Service::stop() {
  if (impl_) impl_->server.stop();
}
bool Service::running() const { return impl_->server.is_running(); }

}  // namespace docfoundry

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


// Runs an Engine + Service on an ephemeral port for end-to-end tests.

#pragma once

#include <memory>
#include <regex>
#include <string>
#include <thread>

#include "docfoundry/engine.hpp"
#include "docfoundry/service.hpp"
#include "support.hpp"

#include <httplib.h>
#include <json.hpp>

namespace testing {

inline void write_fixture_corpus(const fs::path& dir) {
  write_file(dir / "budget.txt",
             "The zeppelin budget for 2023 was approved by the council. "
             "Travel costs rose sharply after the fuel tariff. "
             "The council expects a surplus next year.");
  write_file(dir / "garden.md",
             "# Garden notes\n\nTomatoes ripen in late summer. "
             "Basil grows best beside the tomatoes. Water the beds every morning.");
}

inline std::vector<docfoundry::ScriptRule> fixture_script() {
  return {
      {"Answer the question", {"The zeppelin budget for 2023 was approved by the council [1]."}, true},
      {"Extract a", {R"({"value":"2023","unit":"year"})"}, true},
      {"Combine the following", {"Combined summary."}, true},
      {"Summarize", {"A short summary."}, true},
      {"user: ", {"Noted."}, true},
      {"", {"Generic reply."}, true},
  };
}

struct Reply {
  int status = 0;
  std::string body;
  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

class ServiceHarness {
 public:
  explicit ServiceHarness(docfoundry::EngineConfig cfg, std::unique_ptr<docfoundry::Backend> backend = nullptr)
      : cfg_(std::move(cfg)) {
    start(std::move(backend));
  }
  ~ServiceHarness() { stop(); }

  void start(std::unique_ptr<docfoundry::Backend> backend) {
    engine_ = std::make_unique<docfoundry::Engine>(cfg_, std::move(backend));
    service_ = std::make_unique<docfoundry::Service>(*engine_);
    port_ = service_->bind_any("127.0.0.1");
    if (port_ <= 0) throw std::runtime_error("cannot bind test service");
    thread_ = std::thread([this] { service_->listen(); });
    while (!service_->running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(30);
  }

  void stop() {
    if (service_) service_->stop();
    if (thread_.joinable()) thread_.join();
    client_.reset();
    service_.reset();
    engine_.reset();
  }

  void restart(std::unique_ptr<docfoundry::Backend> backend) {
    stop();
    start(std::move(backend));
  }

  docfoundry::Engine& engine() { return *engine_; }
  int port() const { return port_; }

  Reply get(const std::string& path, const httplib::Headers& headers = {}) {
    return wrap(client_->Get(path, headers));
  }
  Reply post(const std::string& path, const nlohmann::json& body, const httplib::Headers& headers = {}) {
    return wrap(client_->Post(path, headers, body.dump(), "application/json"));
  }
  Reply post_raw(const std::string& path, const std::string& body) {
    return wrap(client_->Post(path, body, "application/json"));
  }
  Reply del(const std::string& path) { return wrap(client_->Delete(path)); }

 private:
  static Reply wrap(const httplib::Result& r) {
    if (!r) throw std::runtime_error("request failed: " + httplib::to_string(r.error()));
    return {r->status, r->body};
  }

  docfoundry::EngineConfig cfg_;
  std::unique_ptr<docfoundry::Engine> engine_;
  std::unique_ptr<docfoundry::Service> service_;
  std::thread thread_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

inline docfoundry::EngineConfig fixture_config(const fs::path& root, const fs::path& allowed) {
  docfoundry::EngineConfig cfg;
  cfg.stores_root = root;
  cfg.allowlist = {allowed};
  cfg.backend.kind = docfoundry::BackendKind::scripted;
  return cfg;
}

/// Replaces timestamp values and a root path so runs can be compared.
inline std::string mask(std::string body, const std::string& root = {}) {
  static const std::regex ts("\"(ingested_at|created_at|timestamp)\":\"[^\"]*\"");
  body = std::regex_replace(body, ts, "\"$1\":\"<masked>\"");
  if (!root.empty()) {
    for (auto pos = body.find(root); pos != std::string::npos; pos = body.find(root, pos)) {
      body.replace(pos, root.size(), "<root>");
    }
  }
  return body;
}

/// True when `j` has exactly the ApiError keys with the right types.
inline bool is_api_error(const nlohmann::json& j, int status) {
  if (!j.is_object() || j.size() != 4) return false;
  if (!j.contains("status") || !j.contains("code") || !j.contains("message") || !j.contains("detail")) return false;
  return j["status"] == status && j["code"].is_string() && !j["code"].get<std::string>().empty() &&
         j["message"].is_string();
}

}  // namespace testing

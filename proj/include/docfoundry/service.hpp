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


#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "docfoundry/engine.hpp"

namespace docfoundry {

/// Machine-readable error body shared by every non-2xx response:
/// {status, code, message, detail}.
struct ApiError {
  int status = 500;
  std::string code;
  std::string message;
  nlohmann::json detail;  // null when absent
};

nlohmann::json to_json(const ApiError& e);

/// Maps the exception currently being handled to its HTTP form.
ApiError api_error_from_current_exception();

/// HTTP front end over an Engine. Routes live under /api; a configured
/// static directory is served at /.
class Service {
 public:
  explicit Service(Engine& engine);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Returns false when the port cannot be bound.
  bool bind(const std::string& host, int port);
  /// Binds an ephemeral port and returns it, or -1.
  int bind_any(const std::string& host);
  /// Blocks until stop().
  bool listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace docfoundry

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

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "docfoundry/ingest.hpp"
#include "docfoundry/llm.hpp"
#include "docfoundry/types.hpp"

namespace docfoundry {

class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, std::string key = {})
      : Error("config", message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

namespace toml {

using Value = std::variant<std::string, std::int64_t, double, bool, std::vector<std::string>>;

/// Flat "section.key" -> value map of a TOML subset: [section] headers,
/// key = value pairs with basic strings, integers, floats, booleans and
/// arrays of strings, and '#' comments. Throws ConfigError with the line
/// number on anything else.
std::map<std::string, Value> parse(std::string_view text);

}  // namespace toml

struct EngineConfig {
  std::filesystem::path stores_root = "docfoundry-data";
  BackendConfig backend;
  std::optional<std::filesystem::path> backend_script;
  ChunkingConfig chunking;
  std::string embedder_id = "hashed-ngram:256:3:0";
  double min_similarity = 0.3;
  std::size_t word_budget = 150;
  std::size_t context_budget_chars = 8000;
  std::size_t max_attempts = 3;
  int port = 8080;
  std::vector<std::filesystem::path> allowlist;
  std::optional<std::filesystem::path> static_dir;
  std::optional<std::string> token;  // from DOCFOUNDRY_TOKEN only
};

/// Keys accepted in the config file, as "section.key".
const std::vector<std::string>& config_keys();

/// Applies parsed TOML values to `cfg`. Unknown keys or ill-typed values
/// throw ConfigError naming the key.
void apply_config(EngineConfig& cfg, const std::map<std::string, toml::Value>& values);

/// DOCFOUNDRY_<SECTION>_<KEY> for every config key (comma-separated for
/// lists), plus DOCFOUNDRY_TOKEN. `getenv` is injectable for tests.
void apply_env(EngineConfig& cfg, const std::function<const char*(const char*)>& getenv);

/// Defaults, then the file (if given), then the process environment.
EngineConfig load_config(const std::optional<std::filesystem::path>& path);

/// Read-only view without secrets.
nlohmann::json to_json(const EngineConfig& cfg);

}  // namespace docfoundry

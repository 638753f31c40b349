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


#include "docfoundry/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace docfoundry {

namespace toml {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && in_string) {
      ++i;
    } else if (line[i] == '"') {
      in_string = !in_string;
    } else if (line[i] == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

class ValueParser {
 public:
  ValueParser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

  Value parse_value() {
    skip_ws();
    if (at_end()) fail("missing value");
    Value v;
    if (s_[pos_] == '"') {
      v = parse_string();
    } else if (s_[pos_] == '[') {
      v = parse_array();
    } else {
      v = parse_scalar();
    }
    skip_ws();
    if (!at_end()) fail("unexpected text after value");
    return v;
  }

 private:
  bool at_end() const { return pos_ >= s_.size(); }
  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }

  std::string parse_string() {
    ++pos_;
    std::string out;
    while (!at_end() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (at_end()) fail("unterminated string");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (at_end()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::vector<std::string> parse_array() {
    ++pos_;
    std::vector<std::string> out;
    skip_ws();
    if (!at_end() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    while (true) {
      skip_ws();
      if (at_end() || s_[pos_] != '"') fail("arrays may only hold strings");
      out.push_back(parse_string());
      skip_ws();
      if (at_end()) fail("unterminated array");
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      if (s_[pos_] != ',') fail("expected ',' in array");
      ++pos_;
      skip_ws();
      if (!at_end() && s_[pos_] == ']') {
        ++pos_;
        return out;
      }
    }
  }

  Value parse_scalar() {
    const auto word = s_.substr(pos_);
    std::size_t n = 0;
    while (n < word.size() && !std::isspace(static_cast<unsigned char>(word[n]))) ++n;
    const auto tok = word.substr(0, n);
    pos_ += n;
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::int64_t i = 0;
    const char* begin = tok.data() + (tok.front() == '+' ? 1 : 0);
    if (auto [p, ec] = std::from_chars(begin, tok.data() + tok.size(), i); ec == std::errc() && p == tok.data() + tok.size()) {
      return i;
    }
    const std::string copy(tok);
    char* end = nullptr;
    const double d = std::strtod(copy.c_str(), &end);
    if (end == copy.c_str() + copy.size() && !copy.empty()) return d;
    fail("unrecognised value '" + copy + "'");
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

bool valid_key(std::string_view k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](unsigned char c) { return std::isalnum(c) || c == '_' || c == '-'; });
}

}  // namespace

std::map<std::string, Value> parse(std::string_view text) {
  std::map<std::string, Value> out;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::size_t start_line = line_no;
    std::string line(trim(strip_comment(raw)));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
      section = std::string(trim(std::string_view(line).substr(1, line.size() - 2)));
      if (section.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(std::string_view(line).substr(0, eq)));
    if (!valid_key(key)) throw ConfigError("config line " + std::to_string(line_no) + ": invalid key '" + key + "'");
    std::string value(trim(std::string_view(line).substr(eq + 1)));
    // Multi-line string arrays.
    if (!value.empty() && value.front() == '[') {
      while (value.find(']') == std::string::npos && std::getline(in, raw)) {
        ++line_no;
        value += ' ';
        value += trim(strip_comment(raw));
      }
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (out.contains(full)) throw ConfigError("duplicate config key '" + full + "'", full);
    out.emplace(full, ValueParser(value, start_line).parse_value());
  }
  return out;
}

}  // namespace toml

namespace {

enum class Kind { string, integer, number, list };

struct KeyDef {
  const char* name;
  Kind kind;
  std::function<void(EngineConfig&, const toml::Value&)> set;
};

std::string as_string(const toml::Value& v) { return std::get<std::string>(v); }
std::int64_t as_int(const toml::Value& v) { return std::get<std::int64_t>(v); }
double as_number(const toml::Value& v) {
  return std::holds_alternative<double>(v) ? std::get<double>(v) : static_cast<double>(std::get<std::int64_t>(v));
}
std::size_t as_size(const toml::Value& v, const char* key) {
  const auto i = as_int(v);
  if (i < 0) throw ConfigError(std::string("config key '") + key + "' must be non-negative", key);
  return static_cast<std::size_t>(i);
}

const std::vector<KeyDef>& key_defs() {
  static const std::vector<KeyDef> defs = {
      {"stores.root", Kind::string, [](EngineConfig& c, const toml::Value& v) { c.stores_root = as_string(v); }},
      {"backend.kind", Kind::string,
       [](EngineConfig& c, const toml::Value& v) { c.backend.kind = parse_backend_kind(as_string(v)); }},
      {"backend.base_url", Kind::string, [](EngineConfig& c, const toml::Value& v) { c.backend.base_url = as_string(v); }},
      {"backend.model", Kind::string, [](EngineConfig& c, const toml::Value& v) { c.backend.model = as_string(v); }},
      {"backend.api_key_env", Kind::string,
       [](EngineConfig& c, const toml::Value& v) { c.backend.api_key_env = as_string(v); }},
      {"backend.timeout_s", Kind::integer,
       [](EngineConfig& c, const toml::Value& v) { c.backend.timeout_s = static_cast<int>(as_int(v)); }},
      {"backend.temperature", Kind::number,
       [](EngineConfig& c, const toml::Value& v) { c.backend.temperature = as_number(v); }},
      {"backend.max_tokens", Kind::integer,
       [](EngineConfig& c, const toml::Value& v) { c.backend.max_tokens = static_cast<int>(as_int(v)); }},
      {"backend.script", Kind::string, [](EngineConfig& c, const toml::Value& v) { c.backend_script = as_string(v); }},
      {"service.port", Kind::integer, [](EngineConfig& c, const toml::Value& v) { c.port = static_cast<int>(as_int(v)); }},
      {"service.allowlist", Kind::list,
       [](EngineConfig& c, const toml::Value& v) {
         c.allowlist.clear();
         for (const auto& p : std::get<std::vector<std::string>>(v)) c.allowlist.emplace_back(p);
       }},
      {"service.static_dir", Kind::string, [](EngineConfig& c, const toml::Value& v) { c.static_dir = as_string(v); }},
      {"chunking.chunk_size", Kind::integer,
       [](EngineConfig& c, const toml::Value& v) { c.chunking.chunk_size_words = as_size(v, "chunking.chunk_size"); }},
      {"chunking.overlap", Kind::integer,
       [](EngineConfig& c, const toml::Value& v) { c.chunking.overlap_words = as_size(v, "chunking.overlap"); }},
      {"embedder.id", Kind::string, [](EngineConfig& c, const toml::Value& v) { c.embedder_id = as_string(v); }},
      {"summarize.min_similarity", Kind::number,
       [](EngineConfig& c, const toml::Value& v) { c.min_similarity = as_number(v); }},
      {"summarize.word_budget", Kind::integer,
       [](EngineConfig& c, const toml::Value& v) { c.word_budget = as_size(v, "summarize.word_budget"); }},
      {"chat.context_budget_chars", Kind::integer,
       [](EngineConfig& c, const toml::Value& v) { c.context_budget_chars = as_size(v, "chat.context_budget_chars"); }},
      {"extract.max_attempts", Kind::integer,
       [](EngineConfig& c, const toml::Value& v) { c.max_attempts = as_size(v, "extract.max_attempts"); }},
  };
  return defs;
}

bool type_matches(Kind kind, const toml::Value& v) {
  switch (kind) {
    case Kind::string: return std::holds_alternative<std::string>(v);
    case Kind::integer: return std::holds_alternative<std::int64_t>(v);
    case Kind::number: return std::holds_alternative<double>(v) || std::holds_alternative<std::int64_t>(v);
    case Kind::list: return std::holds_alternative<std::vector<std::string>>(v);
  }
  return false;
}

void apply_one(EngineConfig& cfg, const KeyDef& def, const toml::Value& v) {
  if (!type_matches(def.kind, v)) throw ConfigError(std::string("config key '") + def.name + "' has the wrong type", def.name);
  try {
    def.set(cfg, v);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config key '") + def.name + "': " + e.what(), def.name);
  }
}

std::string env_name(std::string_view key) {
  std::string out = "DOCFOUNDRY_";
  for (const char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

toml::Value env_value(Kind kind, const std::string& raw, const std::string& name) {
  try {
    switch (kind) {
      case Kind::string: return raw;
      case Kind::integer: {
        std::size_t used = 0;
        const long long i = std::stoll(raw, &used);
        if (used != raw.size()) break;
        return static_cast<std::int64_t>(i);
      }
      case Kind::number: {
        std::size_t used = 0;
        const double d = std::stod(raw, &used);
        if (used != raw.size()) break;
        return d;
      }
      case Kind::list: {
        std::vector<std::string> items;
        std::stringstream ss(raw);
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (!item.empty()) items.push_back(item);
        }
        return items;
      }
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("environment variable " + name + " has an invalid value", name);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& d : key_defs()) k.emplace_back(d.name);
    return k;
  }();
  return keys;
}

void apply_config(EngineConfig& cfg, const std::map<std::string, toml::Value>& values) {
  for (const auto& [key, value] : values) {
    const auto& defs = key_defs();
    const auto it = std::find_if(defs.begin(), defs.end(), [&](const KeyDef& d) { return key == d.name; });
    if (it == defs.end()) throw ConfigError("unknown config key '" + key + "'", key);
    apply_one(cfg, *it, value);
  }
}

void apply_env(EngineConfig& cfg, const std::function<const char*(const char*)>& getenv) {
  for (const auto& def : key_defs()) {
    const std::string name = env_name(def.name);
    const char* raw = getenv(name.c_str());
    if (raw == nullptr || *raw == '\0') continue;
    apply_one(cfg, def, env_value(def.kind, raw, name));
  }
  if (const char* url = getenv("DOCFOUNDRY_BASE_URL"); url != nullptr && *url != '\0') cfg.backend.base_url = url;
  if (const char* token = getenv("DOCFOUNDRY_TOKEN"); token != nullptr && *token != '\0') cfg.token = token;
}

EngineConfig load_config(const std::optional<std::filesystem::path>& path) {
  EngineConfig cfg;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config file " + path->string());
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config(cfg, toml::parse(ss.str()));
  }
  apply_env(cfg, [](const char* name) { return std::getenv(name); });
  try {
    cfg.chunking.validate();
  } catch (const InvalidArgumentError& e) {
    throw ConfigError(std::string("chunking: ") + e.what(), "chunking.overlap");
  }
  if (cfg.max_attempts == 0) throw ConfigError("extract.max_attempts must be at least 1", "extract.max_attempts");
  return cfg;
}

nlohmann::json to_json(const EngineConfig& cfg) {
  nlohmann::json allow = nlohmann::json::array();
  for (const auto& p : cfg.allowlist) allow.push_back(p.string());
  return {{"stores", {{"root", cfg.stores_root.string()}}},
          {"backend", to_json(cfg.backend)},
          {"chunking", {{"chunk_size", cfg.chunking.chunk_size_words}, {"overlap", cfg.chunking.overlap_words}}},
          {"embedder", {{"id", cfg.embedder_id}}},
          {"summarize", {{"min_similarity", cfg.min_similarity}, {"word_budget", cfg.word_budget}}},
          {"chat", {{"context_budget_chars", cfg.context_budget_chars}}},
          {"extract", {{"max_attempts", cfg.max_attempts}}},
          {"service", {{"port", cfg.port}, {"allowlist", allow}, {"auth", cfg.token.has_value()}}}};
}

}  // namespace docfoundry

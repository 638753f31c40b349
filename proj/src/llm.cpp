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

#include "docfoundry/llm.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "docfoundry/ingest.hpp"
#include "internal/http_util.hpp"

namespace docfoundry {

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "openai_compatible") return BackendKind::openai_compatible;
  if (name == "ollama_compatible") return BackendKind::ollama_compatible;
  if (name == "scripted") return BackendKind::scripted;
  if (name == "echo") return BackendKind::echo;
  throw InvalidArgumentError("unknown backend kind: " + std::string(name));
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::openai_compatible: return "openai_compatible";
    case BackendKind::ollama_compatible: return "ollama_compatible";
    case BackendKind::scripted: return "scripted";
    case BackendKind::echo: return "echo";
  }
  return "echo";
}

void BackendConfig::validate() const {
  const bool http = kind == BackendKind::openai_compatible || kind == BackendKind::ollama_compatible;
  if (http && (!base_url || base_url->empty())) {
    throw InvalidArgumentError(std::string(to_string(kind)) + " backend requires base_url");
  }
  if (timeout_s <= 0) throw InvalidArgumentError("timeout_s must be positive");
  if (max_tokens <= 0) throw InvalidArgumentError("max_tokens must be positive");
}

nlohmann::json to_json(const BackendConfig& cfg) {
  nlohmann::json j = {{"kind", to_string(cfg.kind)},
                      {"model", cfg.model},
                      {"timeout_s", cfg.timeout_s},
                      {"temperature", cfg.temperature},
                      {"max_tokens", cfg.max_tokens}};
  if (cfg.base_url) j["base_url"] = *cfg.base_url;
  if (cfg.api_key_env) j["api_key_env"] = *cfg.api_key_env;
  return j;
}

BackendConfig backend_config_from_json(const nlohmann::json& j) {
  BackendConfig cfg;
  cfg.kind = parse_backend_kind(j.at("kind").get<std::string>());
  cfg.model = j.value("model", std::string());
  if (j.contains("base_url")) cfg.base_url = j.at("base_url").get<std::string>();
  if (j.contains("api_key_env")) cfg.api_key_env = j.at("api_key_env").get<std::string>();
  cfg.timeout_s = j.value("timeout_s", 120);
  cfg.temperature = j.value("temperature", 0.0);
  cfg.max_tokens = j.value("max_tokens", 1024);
  return cfg;
}

BackendConfig with_backend(std::string_view name) {
  const auto slash = name.find('/');
  if (slash == std::string_view::npos || slash == 0 || slash + 1 == name.size()) {
    throw InvalidArgumentError("backend must be 'provider/model', got '" + std::string(name) + "'");
  }
  const std::string provider(name.substr(0, slash));
  BackendConfig cfg;
  cfg.model = std::string(name.substr(slash + 1));
  static const std::map<std::string, std::pair<BackendKind, std::string>> kProviders = {
      {"ollama", {BackendKind::ollama_compatible, "http://localhost:11434"}},
      {"openai", {BackendKind::openai_compatible, "https://api.openai.com/v1"}},
      {"anthropic", {BackendKind::openai_compatible, "https://api.anthropic.com/v1"}},
      {"vllm", {BackendKind::openai_compatible, "http://localhost:8000/v1"}},
      {"llamacpp", {BackendKind::openai_compatible, "http://localhost:8080/v1"}},
      {"local", {BackendKind::openai_compatible, ""}},
      {"scripted", {BackendKind::scripted, ""}},
      {"echo", {BackendKind::echo, ""}},
  };
  const auto it = kProviders.find(provider);
  if (it == kProviders.end()) throw InvalidArgumentError("unknown provider: " + provider);
  cfg.kind = it->second.first;
  if (cfg.kind == BackendKind::openai_compatible || cfg.kind == BackendKind::ollama_compatible) {
    const char* override_url = std::getenv("DOCFOUNDRY_BASE_URL");
    if (override_url != nullptr && *override_url != '\0') {
      cfg.base_url = override_url;
    } else if (!it->second.second.empty()) {
      cfg.base_url = it->second.second;
    } else {
      throw InvalidArgumentError("provider '" + provider + "' needs DOCFOUNDRY_BASE_URL");
    }
    cfg.api_key_env = "DOCFOUNDRY_API_KEY";
  }
  return cfg;
}

std::string_view to_string(ChatMessage::Role role) {
  switch (role) {
    case ChatMessage::Role::system: return "system";
    case ChatMessage::Role::user: return "user";
    case ChatMessage::Role::assistant: return "assistant";
  }
  return "user";
}

ChatMessage::Role parse_role(std::string_view name) {
  if (name == "system") return ChatMessage::Role::system;
  if (name == "user") return ChatMessage::Role::user;
  if (name == "assistant") return ChatMessage::Role::assistant;
  throw InvalidArgumentError("unknown chat role: " + std::string(name));
}

nlohmann::json to_json(const ChatMessage& m) { return {{"role", to_string(m.role)}, {"content", m.content}}; }

ChatMessage chat_message_from_json(const nlohmann::json& j) {
  return {parse_role(j.at("role").get<std::string>()), j.at("content").get<std::string>()};
}

void validate_conversation(std::span<const ChatMessage> messages) {
  if (messages.empty()) throw InvalidArgumentError("conversation is empty");
  std::size_t i = messages.front().role == ChatMessage::Role::system ? 1 : 0;
  if (i == messages.size()) throw InvalidArgumentError("conversation has no user message");
  for (std::size_t n = 0; i < messages.size(); ++i, ++n) {
    const auto want = n % 2 == 0 ? ChatMessage::Role::user : ChatMessage::Role::assistant;
    if (messages[i].role != want) {
      throw InvalidArgumentError("message " + std::to_string(i) + " should have role " + std::string(to_string(want)));
    }
  }
}

void CallLog::append(CallLogEntry entry) {
  std::lock_guard lock(mutex_);
  entry.sequence = entries_.size();
  entries_.push_back(std::move(entry));
}

std::size_t CallLog::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::vector<CallLogEntry> CallLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

Backend::Backend(BackendConfig cfg, std::shared_ptr<CallLog> log)
    : cfg_(std::move(cfg)), log_(log ? std::move(log) : std::make_shared<CallLog>()) {
  cfg_.validate();
}

template <typename F>
GenerationResult Backend::invoke(std::string operation, nlohmann::json request, std::size_t prompt_chars,
                                 const GenerationParams& params, F&& call) {
  const Resolved resolved{params.temperature.value_or(cfg_.temperature), params.max_tokens.value_or(cfg_.max_tokens)};
  CallLogEntry entry;
  entry.timestamp = utc_now_iso8601();
  entry.operation = std::move(operation);
  entry.request = std::move(request);
  entry.params = {{"temperature", resolved.temperature}, {"max_tokens", resolved.max_tokens}, {"model", cfg_.model}};
  const auto started = std::chrono::steady_clock::now();
  try {
    GenerationResult result;
    result.text = call(resolved);
    result.backend_kind = cfg_.kind;
    result.model = cfg_.model;
    result.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    result.prompt_chars = prompt_chars;
    result.completion_chars = result.text.size();
    entry.result = result.text;
    log_->append(std::move(entry));
    return result;
  } catch (const std::exception& e) {
    entry.error = e.what();
    log_->append(std::move(entry));
    throw;
  }
}

GenerationResult Backend::complete(std::string_view prompt, const GenerationParams& params) {
  if (prompt.empty()) throw InvalidArgumentError("prompt is empty");
  return invoke("complete", std::string(prompt), prompt.size(), params,
                [&](const Resolved& r) { return do_complete(prompt, r); });
}

GenerationResult Backend::chat(std::span<const ChatMessage> messages, const GenerationParams& params) {
  validate_conversation(messages);
  nlohmann::json request = nlohmann::json::array();
  std::size_t chars = 0;
  for (const auto& m : messages) {
    request.push_back(to_json(m));
    chars += m.content.size();
  }
  return invoke("chat", std::move(request), chars, params, [&](const Resolved& r) { return do_chat(messages, r); });
}

EchoBackend::EchoBackend(BackendConfig cfg, std::shared_ptr<CallLog> log) : Backend(std::move(cfg), std::move(log)) {}

std::string EchoBackend::do_complete(std::string_view prompt, const Resolved&) { return std::string(prompt); }

std::string EchoBackend::do_chat(std::span<const ChatMessage> messages, const Resolved&) {
  std::string out;
  for (const auto& m : messages) {
    if (m.role != ChatMessage::Role::user) continue;
    if (!out.empty()) out += '\n';
    out += m.content;
  }
  return out;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules, BackendConfig cfg, std::shared_ptr<CallLog> log)
    : Backend([&] {
        cfg.kind = BackendKind::scripted;
        return std::move(cfg);
      }(),
              std::move(log)),
      rules_(std::move(rules)) {}

void ScriptedBackend::push(const std::string& pattern, std::string response) {
  std::lock_guard lock(mutex_);
  for (auto& r : rules_) {
    if (r.pattern == pattern) {
      r.responses.push_back(std::move(response));
      return;
    }
  }
  rules_.push_back(ScriptRule{pattern, {std::move(response)}, false});
}

std::string ScriptedBackend::next(std::string_view rendered) {
  std::lock_guard lock(mutex_);
  for (auto& r : rules_) {
    if (r.responses.empty() || rendered.find(r.pattern) == std::string_view::npos) continue;
    std::string out = r.responses.front();
    if (r.responses.size() > 1 || !r.repeat_last) r.responses.pop_front();
    return out;
  }
  throw BackendError("no_matching_pattern", "scripted backend has no response for prompt: " +
                                                std::string(rendered.substr(0, 120)));
}

std::string ScriptedBackend::do_complete(std::string_view prompt, const Resolved&) { return next(prompt); }

std::string ScriptedBackend::do_chat(std::span<const ChatMessage> messages, const Resolved&) {
  std::string rendered;
  for (const auto& m : messages) {
    rendered += to_string(m.role);
    rendered += ": ";
    rendered += m.content;
    rendered += '\n';
  }
  return next(rendered);
}

std::vector<ScriptRule> script_from_json(const nlohmann::json& j) {
  const auto& rules = j.is_array() ? j : j.at("rules");
  std::vector<ScriptRule> out;
  for (const auto& r : rules) {
    ScriptRule rule;
    rule.pattern = r.value("pattern", std::string());
    for (const auto& resp : r.at("responses")) rule.responses.push_back(resp.is_string() ? resp.get<std::string>() : resp.dump());
    rule.repeat_last = r.value("repeat", false);
    out.push_back(std::move(rule));
  }
  return out;
}

std::vector<ScriptRule> load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open script " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return script_from_json(nlohmann::json::parse(ss.str()));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgumentError("bad script " + path.string() + ": " + e.what());
  }
}

namespace wire {

namespace {
nlohmann::json messages_json(std::span<const ChatMessage> messages) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : messages) arr.push_back(to_json(m));
  return arr;
}
}  // namespace

nlohmann::json openai_chat_body(const std::string& model, std::span<const ChatMessage> messages, double temperature,
                                int max_tokens) {
  return {{"model", model},
          {"messages", messages_json(messages)},
          {"temperature", temperature},
          {"max_tokens", max_tokens},
          {"stream", false}};
}

nlohmann::json ollama_generate_body(const std::string& model, std::string_view prompt, double temperature,
                                    int max_tokens) {
  return {{"model", model},
          {"prompt", prompt},
          {"stream", false},
          {"options", {{"temperature", temperature}, {"num_predict", max_tokens}}}};
}

nlohmann::json ollama_chat_body(const std::string& model, std::span<const ChatMessage> messages, double temperature,
                                int max_tokens) {
  return {{"model", model},
          {"messages", messages_json(messages)},
          {"stream", false},
          {"options", {{"temperature", temperature}, {"num_predict", max_tokens}}}};
}

std::string openai_response_text(const nlohmann::json& response) {
  return response.at("choices").at(0).at("message").at("content").get<std::string>();
}

std::string ollama_generate_text(const nlohmann::json& response) { return response.at("response").get<std::string>(); }

std::string ollama_chat_text(const nlohmann::json& response) {
  return response.at("message").at("content").get<std::string>();
}

}  // namespace wire

HttpBackend::HttpBackend(BackendConfig cfg, std::shared_ptr<CallLog> log) : Backend(std::move(cfg), std::move(log)) {}

std::string HttpBackend::post(const std::string& endpoint, const nlohmann::json& body) {
  const auto parts = detail::split_url(*config().base_url);
  httplib::Client client(parts.origin);
  client.set_connection_timeout(config().timeout_s);
  client.set_read_timeout(config().timeout_s);
  client.set_write_timeout(config().timeout_s);
  httplib::Headers headers;
  if (config().api_key_env) {
    const char* key = std::getenv(config().api_key_env->c_str());
    if (key != nullptr && *key != '\0') headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string path = parts.path + endpoint;
  const std::string payload = body.dump();
  httplib::Result res = client.Post(path, headers, payload, "application/json");
  if (!res && detail::is_timeout(res.error())) res = client.Post(path, headers, payload, "application/json");
  if (!res) {
    const auto err = res.error();
    throw BackendError(detail::is_timeout(err) ? "backend_timeout" : "backend_unreachable",
                       "request to " + parts.origin + path + " failed: " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendError("backend_http_error",
                       "HTTP " + std::to_string(res->status) + " from " + path + ": " + res->body.substr(0, 300),
                       res->status);
  }
  return res->body;
}

namespace {

template <typename F>
std::string parse_reply(const std::string& body, F&& extract) {
  try {
    return extract(nlohmann::json::parse(body));
  } catch (const nlohmann::json::exception& e) {
    throw BackendError("backend_bad_response", std::string("unexpected response shape: ") + e.what() + ": " +
                                                   body.substr(0, 200));
  }
}

}  // namespace

std::string HttpBackend::do_complete(std::string_view prompt, const Resolved& p) {
  if (config().kind == BackendKind::openai_compatible) {
    const ChatMessage msg{ChatMessage::Role::user, std::string(prompt)};
    const auto body = wire::openai_chat_body(config().model, std::span<const ChatMessage>(&msg, 1), p.temperature,
                                             p.max_tokens);
    return parse_reply(post("/chat/completions", body), wire::openai_response_text);
  }
  const auto body = wire::ollama_generate_body(config().model, prompt, p.temperature, p.max_tokens);
  return parse_reply(post("/api/generate", body), wire::ollama_generate_text);
}

std::string HttpBackend::do_chat(std::span<const ChatMessage> messages, const Resolved& p) {
  if (config().kind == BackendKind::openai_compatible) {
    const auto body = wire::openai_chat_body(config().model, messages, p.temperature, p.max_tokens);
    return parse_reply(post("/chat/completions", body), wire::openai_response_text);
  }
  const auto body = wire::ollama_chat_body(config().model, messages, p.temperature, p.max_tokens);
  return parse_reply(post("/api/chat", body), wire::ollama_chat_text);
}

bool HttpBackend::reachable() const {
  try {
    const auto parts = detail::split_url(*config().base_url);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(std::min(config().timeout_s, 3));
    client.set_read_timeout(std::min(config().timeout_s, 3));
    const std::string probe =
        parts.path + (config().kind == BackendKind::openai_compatible ? "/models" : "/api/tags");
    return static_cast<bool>(client.Get(probe));
  } catch (...) {
    return false;
  }
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg, std::vector<ScriptRule> script,
                                      std::shared_ptr<CallLog> log) {
  switch (cfg.kind) {
    case BackendKind::echo:
      return std::make_unique<EchoBackend>(cfg, std::move(log));
    case BackendKind::scripted:
      return std::make_unique<ScriptedBackend>(std::move(script), cfg, std::move(log));
    case BackendKind::openai_compatible:
    case BackendKind::ollama_compatible:
      return std::make_unique<HttpBackend>(cfg, std::move(log));
  }
  throw InvalidArgumentError("unknown backend kind");
}

namespace {

bool is_name_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_name_char(char c) { return is_name_start(c) || (c >= '0' && c <= '9'); }

// Calls on_text for literal runs and on_var for placeholders.
template <typename Text, typename Var>
void scan_template(std::string_view t, Text&& on_text, Var&& on_var) {
  std::size_t i = 0;
  while (i < t.size()) {
    if (t.compare(i, 2, "{{") == 0 || t.compare(i, 2, "}}") == 0) {
      on_text(t.substr(i, 1));
      i += 2;
      continue;
    }
    if (t[i] == '{' && i + 1 < t.size() && is_name_start(t[i + 1])) {
      std::size_t j = i + 1;
      while (j < t.size() && is_name_char(t[j])) ++j;
      if (j < t.size() && t[j] == '}') {
        on_var(t.substr(i + 1, j - i - 1));
        i = j + 1;
        continue;
      }
    }
    on_text(t.substr(i, 1));
    ++i;
  }
}

std::string join(const std::vector<std::string>& names) {
  std::string s;
  for (const auto& n : names) {
    if (!s.empty()) s += ", ";
    s += n;
  }
  return s;
}

}  // namespace

MissingVariableError::MissingVariableError(std::vector<std::string> names)
    : Error("missing_variable", "template variables not provided: " + join(names)), names_(std::move(names)) {}

std::vector<std::string> template_placeholders(std::string_view tmpl) {
  std::vector<std::string> names;
  scan_template(tmpl, [](std::string_view) {}, [&](std::string_view name) {
    if (std::find(names.begin(), names.end(), name) == names.end()) names.emplace_back(name);
  });
  return names;
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::vector<std::string> missing;
  for (const auto& name : template_placeholders(tmpl)) {
    if (!vars.contains(name)) missing.push_back(name);
  }
  if (!missing.empty()) throw MissingVariableError(std::move(missing));
  std::string out;
  scan_template(tmpl, [&](std::string_view s) { out += s; }, [&](std::string_view name) {
    out += vars.at(std::string(name));
  });
  return out;
}

}  // namespace docfoundry

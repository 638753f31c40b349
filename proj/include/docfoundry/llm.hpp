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
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "docfoundry/types.hpp"

namespace docfoundry {

enum class BackendKind { openai_compatible, ollama_compatible, scripted, echo };

BackendKind parse_backend_kind(std::string_view name);
std::string_view to_string(BackendKind kind);

/// Connection settings. API keys are read from the environment variable
/// named by `api_key_env` at call time and never stored here.
struct BackendConfig {
  BackendKind kind = BackendKind::echo;
  std::optional<std::string> base_url;
  std::string model;
  std::optional<std::string> api_key_env;
  int timeout_s = 120;
  double temperature = 0.0;
  int max_tokens = 1024;

  /// Throws InvalidArgumentError if an HTTP kind has no base_url.
  void validate() const;
};

nlohmann::json to_json(const BackendConfig& cfg);
BackendConfig backend_config_from_json(const nlohmann::json& j);

/// Parses "provider/model" (split at the first '/'). Known providers:
/// ollama, openai, anthropic, vllm, llamacpp, local (needs DOCFOUNDRY_BASE_URL),
/// scripted, echo. DOCFOUNDRY_BASE_URL overrides the default base URL of HTTP providers.
BackendConfig with_backend(std::string_view name);

struct ChatMessage {
  enum class Role { system, user, assistant };
  Role role = Role::user;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

std::string_view to_string(ChatMessage::Role role);
ChatMessage::Role parse_role(std::string_view name);
nlohmann::json to_json(const ChatMessage& m);
ChatMessage chat_message_from_json(const nlohmann::json& j);

/// Optional leading system message, then user/assistant alternating,
/// starting with user. Throws InvalidArgumentError otherwise.
void validate_conversation(std::span<const ChatMessage> messages);

struct GenerationParams {
  std::optional<double> temperature;
  std::optional<int> max_tokens;
};

struct GenerationResult {
  std::string text;
  BackendKind backend_kind = BackendKind::echo;
  std::string model;
  double latency_ms = 0.0;
  std::size_t prompt_chars = 0;
  std::size_t completion_chars = 0;
};

class BackendError : public Error {
 public:
  BackendError(std::string code, const std::string& message, int http_status = 0)
      : Error(std::move(code), message), http_status_(http_status) {}
  int http_status() const noexcept { return http_status_; }
  /// Connection failures and timeouts; the backend could not be reached.
  bool is_transport() const { return code() == "backend_unreachable" || code() == "backend_timeout"; }

 private:
  int http_status_;
};

struct CallLogEntry {
  std::size_t sequence = 0;
  std::string timestamp;
  std::string operation;    // "complete" | "chat"
  nlohmann::json request;   // prompt string or message array
  nlohmann::json params;
  std::optional<std::string> result;
  std::optional<std::string> error;
};

/// Append-only, totally ordered record of backend invocations.
class CallLog {
 public:
  void append(CallLogEntry entry);
  std::size_t size() const;
  std::vector<CallLogEntry> entries() const;

 private:
  mutable std::mutex mutex_;
  std::vector<CallLogEntry> entries_;
};

/// Unified text-generation client. Every complete()/chat() call appends
/// exactly one CallLog entry, on success or failure.
class Backend {
 public:
  explicit Backend(BackendConfig cfg, std::shared_ptr<CallLog> log = nullptr);
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  GenerationResult complete(std::string_view prompt, const GenerationParams& params = {});
  GenerationResult chat(std::span<const ChatMessage> messages, const GenerationParams& params = {});

  const BackendConfig& config() const { return cfg_; }
  CallLog& log() const { return *log_; }
  std::shared_ptr<CallLog> log_ptr() const { return log_; }

  /// Cheap liveness probe; local kinds are always reachable.
  virtual bool reachable() const { return true; }

 protected:
  struct Resolved {
    double temperature;
    int max_tokens;
  };
  virtual std::string do_complete(std::string_view prompt, const Resolved& params) = 0;
  virtual std::string do_chat(std::span<const ChatMessage> messages, const Resolved& params) = 0;

 private:
  template <typename F>
  GenerationResult invoke(std::string operation, nlohmann::json request, std::size_t prompt_chars,
                          const GenerationParams& params, F&& call);

  BackendConfig cfg_;
  std::shared_ptr<CallLog> log_;
};

/// Returns the prompt verbatim; chat returns the user contents joined by '\n'.
class EchoBackend final : public Backend {
 public:
  explicit EchoBackend(BackendConfig cfg = {}, std::shared_ptr<CallLog> log = nullptr);

 protected:
  std::string do_complete(std::string_view prompt, const Resolved&) override;
  std::string do_chat(std::span<const ChatMessage> messages, const Resolved&) override;
};

/// `pattern` is a substring test against the rendered prompt (for chat: the
/// messages rendered as "role: content" lines). An empty pattern matches all.
struct ScriptRule {
  std::string pattern;
  std::deque<std::string> responses;
  bool repeat_last = false;  // keep answering with the last response once drained
};

/// Test seam: the first rule whose pattern matches and that still has a
/// response pops it; no such rule raises no_matching_pattern.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(std::vector<ScriptRule> rules = {}, BackendConfig cfg = {},
                           std::shared_ptr<CallLog> log = nullptr);

  void push(const std::string& pattern, std::string response);

 protected:
  std::string do_complete(std::string_view prompt, const Resolved&) override;
  std::string do_chat(std::span<const ChatMessage> messages, const Resolved&) override;

 private:
  std::string next(std::string_view rendered);

  std::mutex mutex_;
  std::vector<ScriptRule> rules_;
};

/// Script file: {"rules":[{"pattern":"...","responses":["..."],"repeat":false}]}.
std::vector<ScriptRule> load_script(const std::filesystem::path& path);
std::vector<ScriptRule> script_from_json(const nlohmann::json& j);

/// OpenAI chat-completions or Ollama dialect over HTTP.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig cfg, std::shared_ptr<CallLog> log = nullptr);
  bool reachable() const override;

 protected:
  std::string do_complete(std::string_view prompt, const Resolved& params) override;
  std::string do_chat(std::span<const ChatMessage> messages, const Resolved& params) override;

 private:
  std::string post(const std::string& path, const nlohmann::json& body);
};

/// Request bodies and paths for the two HTTP dialects (see docs/wire-formats.md).
namespace wire {
nlohmann::json openai_chat_body(const std::string& model, std::span<const ChatMessage> messages, double temperature,
                                int max_tokens);
nlohmann::json ollama_generate_body(const std::string& model, std::string_view prompt, double temperature,
                                    int max_tokens);
nlohmann::json ollama_chat_body(const std::string& model, std::span<const ChatMessage> messages, double temperature,
                                int max_tokens);
std::string openai_response_text(const nlohmann::json& response);
std::string ollama_generate_text(const nlohmann::json& response);
std::string ollama_chat_text(const nlohmann::json& response);
}  // namespace wire

/// Constructs the backend for `cfg`; scripted kinds take `script`.
std::unique_ptr<Backend> make_backend(const BackendConfig& cfg, std::vector<ScriptRule> script = {},
                                      std::shared_ptr<CallLog> log = nullptr);

class MissingVariableError : public Error {
 public:
  explicit MissingVariableError(std::vector<std::string> names);
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

/// Replaces {name} placeholders (name = [A-Za-z_][A-Za-z0-9_]*). "{{" and
/// "}}" produce literal braces; other braces pass through. Unused variables
/// are ignored; missing ones raise MissingVariableError listing all of them.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

/// Placeholder names in order of first appearance.
std::vector<std::string> template_placeholders(std::string_view tmpl);

}  // namespace docfoundry

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

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "docfoundry/config.hpp"
#include "docfoundry/dual_store.hpp"
#include "docfoundry/ingest.hpp"
#include "docfoundry/llm.hpp"
#include "docfoundry/pipelines.hpp"
#include "docfoundry/structured.hpp"

namespace docfoundry {

inline constexpr std::string_view kVersion = "0.1.0";

class PathNotAllowedError : public Error {
 public:
  explicit PathNotAllowedError(const std::string& message) : Error("path_not_allowed", message) {}
};

class SessionBusyError : public Error {
 public:
  explicit SessionBusyError(const std::string& message) : Error("session_busy", message) {}
};

struct IngestReport {
  std::size_t documents = 0;  // newly ingested
  std::size_t chunks = 0;
  std::vector<LoadIssue> issues;
  std::vector<std::string> duplicates;  // source paths already in the store

  bool partial() const { return !issues.empty() || !duplicates.empty(); }
};

nlohmann::json to_json(const IngestReport& r);

struct ChatReply {
  std::string session_id;
  std::string reply;
};

/// Document catalog, dual store, sessions and extraction jobs persisted under
/// `stores.root`. The CLI and the HTTP service are thin layers over this type.
///
/// Layout: documents.jsonl, store/ (dual-store directory), sessions/<id>.jsonl
/// (one header line, then one message per line) and jobs/<id>.json.
class Engine {
 public:
  /// Loads any persisted state. `backend` overrides the configured one.
  explicit Engine(EngineConfig cfg, std::unique_ptr<Backend> backend = nullptr);

  static std::unique_ptr<Backend> make_configured_backend(const EngineConfig& cfg,
                                                          std::shared_ptr<CallLog> log = nullptr);

  const EngineConfig& config() const { return cfg_; }
  Backend& backend() { return *backend_; }
  CallLog& call_log() { return backend_->log(); }
  std::shared_ptr<const Embedder> embedder() const;

  /// True when `path` resolves inside one of the allow-list roots.
  bool path_allowed(const std::filesystem::path& path) const;

  /// Loads, chunks and ingests the new documents under `dir`. Documents whose
  /// id is already known are listed as duplicates; if nothing new remains,
  /// throws DuplicateError. `enforce_allowlist` is set by the service.
  IngestReport ingest(const std::filesystem::path& dir, const std::vector<std::string>& globs, StoreKind kind,
                      bool enforce_allowlist = false);

  /// Mode used when the caller gives none: hybrid for dual stores, else the
  /// single bound store.
  SearchMode default_mode() const;

  /// {total, page, k, mode, hits:[{chunk_ref, score, snippet, highlights, doc_path, ...}]}
  nlohmann::json search(std::string_view query, std::size_t k, std::optional<SearchMode> mode,
                        std::size_t page = 0) const;

  /// ask + verify_grounding; {question, answer, mode, sources, grounding}.
  nlohmann::json ask(std::string_view question, std::size_t k, std::optional<SearchMode> mode);

  nlohmann::json prompt(std::string_view text);

  nlohmann::json summarize(const std::string& doc_id, const std::optional<std::string>& concept_text,
                           std::optional<std::size_t> word_budget);

  /// Runs extract_over_units and records the rows as a job; {job_id, rows, ...}.
  nlohmann::json extract(const std::string& doc_id, UnitKind unit, const RecordSchema& schema,
                         std::string_view prompt_template, bool attempt_fix);
  std::string job_csv(const std::string& job_id) const;

  void delete_document(const std::string& doc_id);
  nlohmann::json documents() const;
  std::optional<DocumentRecord> document(const std::string& doc_id) const;
  nlohmann::json health() const;

  /// One chat turn. A missing session id starts a new session; an unknown
  /// one throws NotFoundError; a turn already running on the session throws
  /// SessionBusyError. Both messages are persisted before this returns.
  ChatReply chat(const std::optional<std::string>& session_id, std::string_view message);
  ChatSession session(const std::string& session_id) const;

  /// Test hook called after a turn is persisted and before chat() returns.
  std::function<void(const std::string& session_id)> after_persist;

 private:
  void load_state();
  void persist_catalog() const;
  ChatSession read_session(const std::filesystem::path& file) const;
  std::string doc_path(const std::string& doc_id) const;
  nlohmann::json ask_locked(std::string_view question, std::size_t k, SearchMode mode);

  EngineConfig cfg_;
  std::unique_ptr<Backend> backend_;
  std::shared_ptr<const Embedder> embedder_;

  mutable std::shared_mutex state_mutex_;  // catalog_ and store_
  std::map<std::string, DocumentRecord> catalog_;
  std::unique_ptr<DualStore> store_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, ChatSession> sessions_;
  std::set<std::string> busy_sessions_;
  std::size_t next_session_ = 1;

  mutable std::mutex jobs_mutex_;
  std::size_t next_job_ = 1;
};

}  // namespace docfoundry

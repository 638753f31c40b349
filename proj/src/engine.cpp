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


#include "docfoundry/engine.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "docfoundry/query.hpp"

namespace docfoundry {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error("io", "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

// Largest N among files named "<prefix>N<suffix>" in dir, plus one.
std::size_t next_sequence(const fs::path& dir, const std::string& prefix, const std::string& suffix) {
  std::size_t next = 1;
  if (!fs::is_directory(dir)) return next;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() <= prefix.size() + suffix.size() || !name.starts_with(prefix) || !name.ends_with(suffix)) continue;
    const std::string digits = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); })) {
      continue;
    }
    next = std::max(next, static_cast<std::size_t>(std::stoull(digits)) + 1);
  }
  return next;
}

bool covers(StoreKind have, StoreKind want) { return have == StoreKind::dual || have == want; }

nlohmann::json span_json(const Span& s) { return {{"start", s.start}, {"end", s.end}}; }

template <typename T>
nlohmann::json opt_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const IngestReport& r) {
  nlohmann::json issues = nlohmann::json::array();
  for (const auto& i : r.issues) issues.push_back({{"source_path", i.source_path}, {"reason", i.reason}});
  return {{"documents", r.documents}, {"chunks", r.chunks}, {"issues", issues}, {"duplicates", r.duplicates}};
}

std::unique_ptr<Backend> Engine::make_configured_backend(const EngineConfig& cfg, std::shared_ptr<CallLog> log) {
  std::vector<ScriptRule> script;
  if (cfg.backend.kind == BackendKind::scripted && cfg.backend_script) script = load_script(*cfg.backend_script);
  return make_backend(cfg.backend, std::move(script), std::move(log));
}

Engine::Engine(EngineConfig cfg, std::unique_ptr<Backend> backend)
    : cfg_(std::move(cfg)), backend_(backend ? std::move(backend) : make_configured_backend(cfg_)) {
  cfg_.chunking.validate();
  embedder_ = make_embedder(cfg_.embedder_id);
  load_state();
}

std::shared_ptr<const Embedder> Engine::embedder() const { return embedder_; }

void Engine::load_state() {
  const fs::path root = cfg_.stores_root;
  if (fs::exists(root / "documents.jsonl")) {
    for (auto& d : read_documents_jsonl(root / "documents.jsonl")) catalog_.emplace(d.doc_id, std::move(d));
  }
  if (fs::exists(root / "store" / "manifest.json")) {
    store_ = DualStore::load(root / "store");
    if (store_->embedder().id() != embedder_->id()) embedder_ = make_embedder(store_->embedder().id());
  }
  const fs::path sessions = root / "sessions";
  if (fs::is_directory(sessions)) {
    for (const auto& entry : fs::directory_iterator(sessions)) {
      if (entry.path().extension() != ".jsonl") continue;
      auto s = read_session(entry.path());
      sessions_.emplace(s.session_id, std::move(s));
    }
  }
  next_session_ = next_sequence(sessions, "session-", ".jsonl");
  next_job_ = next_sequence(root / "jobs", "job-", ".json");
}

void Engine::persist_catalog() const {
  std::vector<DocumentRecord> docs;
  for (const auto& [_, d] : catalog_) docs.push_back(d);
  std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) { return a.source_path < b.source_path; });
  fs::create_directories(cfg_.stores_root);
  write_documents_jsonl(fs::path(cfg_.stores_root) / "documents.jsonl", docs);
  const fs::path store_dir = fs::path(cfg_.stores_root) / "store";
  if (store_) {
    store_->save(store_dir);
  } else {
    fs::remove_all(store_dir);
  }
}

bool Engine::path_allowed(const fs::path& path) const {
  std::error_code ec;
  const fs::path target = fs::weakly_canonical(fs::absolute(path), ec);
  if (ec) return false;
  for (const auto& root : cfg_.allowlist) {
    const fs::path r = fs::weakly_canonical(fs::absolute(root), ec);
    if (ec) continue;
    const fs::path rel = target.lexically_relative(r);
    if (!rel.empty() && *rel.begin() != "..") return true;
  }
  return false;
}

IngestReport Engine::ingest(const fs::path& dir, const std::vector<std::string>& globs, StoreKind kind,
                            bool enforce_allowlist) {
  if (enforce_allowlist && !path_allowed(dir)) {
    throw PathNotAllowedError(cfg_.allowlist.empty() ? "no ingest allow-list is configured"
                                                     : "path is outside the ingest allow-list: " + dir.string());
  }
  auto loaded = load_directory(dir, globs);
  std::unique_lock lock(state_mutex_);
  if (store_ && !covers(store_->kind(), kind)) {
    throw Error("store_unavailable", "the existing store is " + std::string(to_string(store_->kind())) +
                                         " and cannot take a " + std::string(to_string(kind)) + " ingest");
  }
  IngestReport report;
  report.issues = std::move(loaded.issues);
  std::vector<DocumentRecord> fresh;
  for (auto& d : loaded.documents) {
    if (catalog_.contains(d.doc_id)) report.duplicates.push_back(d.source_path);
    else fresh.push_back(std::move(d));
  }
  if (fresh.empty() && !report.duplicates.empty()) {
    throw DuplicateError("already ingested: " + report.duplicates.front() +
                         (report.duplicates.size() > 1 ? " and " + std::to_string(report.duplicates.size() - 1) + " more"
                                                       : std::string()));
  }
  if (fresh.empty()) return report;
  std::vector<Chunk> chunks;
  for (const auto& d : fresh) {
    auto cs = chunk_document(d, cfg_.chunking);
    chunks.insert(chunks.end(), std::make_move_iterator(cs.begin()), std::make_move_iterator(cs.end()));
  }
  const bool created = !store_;
  if (created) store_ = std::make_unique<DualStore>(kind, embedder_);
  try {
    store_->ingest(chunks);
  } catch (...) {
    if (created) store_.reset();
    throw;
  }
  for (auto& d : fresh) catalog_.emplace(d.doc_id, std::move(d));
  report.documents = fresh.size();
  report.chunks = chunks.size();
  persist_catalog();
  return report;
}

SearchMode Engine::default_mode() const {
  std::shared_lock lock(state_mutex_);
  if (!store_ || store_->kind() == StoreKind::dual) return SearchMode::hybrid;
  return store_->kind() == StoreKind::sparse ? SearchMode::sparse : SearchMode::dense;
}

std::string Engine::doc_path(const std::string& doc_id) const {
  const auto it = catalog_.find(doc_id);
  return it == catalog_.end() ? std::string() : it->second.source_path;
}

nlohmann::json Engine::search(std::string_view query, std::size_t k, std::optional<SearchMode> mode,
                              std::size_t page) const {
  if (k == 0) throw InvalidArgumentError("k must be positive");
  const SearchMode m = mode.value_or(default_mode());
  if (m != SearchMode::dense) (void)parse_query(query);
  std::shared_lock lock(state_mutex_);
  nlohmann::json out = {{"k", k}, {"page", page}, {"mode", to_string(m)}, {"total", 0}, {"hits", nlohmann::json::array()}};
  if (!store_ || store_->empty()) return out;
  const auto result = store_->search(query, k, m, {}, page);
  out["total"] = result.total;
  for (const auto& h : result.hits) {
    const auto chunk = store_->chunk(h.ref);
    nlohmann::json highlights = nlohmann::json::array();
    for (const auto& s : h.highlights) highlights.push_back(span_json(s));
    out["hits"].push_back({{"chunk_ref", h.ref.str()},
                           {"doc_id", h.ref.doc_id},
                           {"chunk_index", h.ref.chunk_index},
                           {"doc_path", doc_path(h.ref.doc_id)},
                           {"score", h.fused_score},
                           {"snippet", chunk ? chunk->text : std::string()},
                           {"highlights", highlights},
                           {"matched_terms", h.matched_terms},
                           {"sparse_rank", opt_json(h.sparse_rank)},
                           {"dense_rank", opt_json(h.dense_rank)},
                           {"sparse_score", opt_json(h.sparse_score)},
                           {"dense_distance", opt_json(h.dense_distance)}});
  }
  return out;
}

nlohmann::json Engine::ask(std::string_view question, std::size_t k, std::optional<SearchMode> mode) {
  const SearchMode m = mode.value_or(default_mode());
  std::shared_lock lock(state_mutex_);
  return ask_locked(question, k, m);
}

nlohmann::json Engine::ask_locked(std::string_view question, std::size_t k, SearchMode mode) {
  if (!store_ || store_->empty()) throw EmptyStoreError("no documents have been ingested");
  const auto answer = docfoundry::ask(*backend_, *store_, question, k, mode);
  const auto grounding = verify_grounding(answer, *store_);
  auto out = to_json(answer);
  for (auto& s : out["sources"]) s["doc_path"] = doc_path(ChunkRef::parse(s["chunk_ref"].get<std::string>()).doc_id);
  out["grounding"] = to_json(grounding);
  return out;
}

nlohmann::json Engine::prompt(std::string_view text) {
  const auto r = backend_->complete(text);
  return {{"text", r.text}, {"backend", to_string(r.backend_kind)}, {"model", r.model}};
}

std::optional<DocumentRecord> Engine::document(const std::string& doc_id) const {
  std::shared_lock lock(state_mutex_);
  const auto it = catalog_.find(doc_id);
  if (it == catalog_.end()) return std::nullopt;
  return it->second;
}

nlohmann::json Engine::summarize(const std::string& doc_id, const std::optional<std::string>& concept_text,
                                 std::optional<std::size_t> word_budget) {
  std::vector<Chunk> chunks;
  {
    std::shared_lock lock(state_mutex_);
    if (!catalog_.contains(doc_id) || !store_) throw NotFoundError("unknown document: " + doc_id);
    chunks = store_->chunks_of(doc_id);
  }
  SummarizeOptions options;
  options.word_budget = word_budget.value_or(cfg_.word_budget);
  options.window_words = cfg_.chunking.chunk_size_words;
  const auto result = concept_text
                          ? summarize_concept(*backend_, *embedder_, chunks, *concept_text, cfg_.min_similarity, options)
                          : summarize_map_reduce(*backend_, chunks, options);
  auto out = to_json(result);
  out["doc_id"] = doc_id;
  return out;
}

nlohmann::json Engine::extract(const std::string& doc_id, UnitKind unit, const RecordSchema& schema,
                               std::string_view prompt_template, bool attempt_fix) {
  if (auto report = check_schema(schema); !report.ok) throw SchemaError(report);
  const auto doc = document(doc_id);
  if (!doc) throw NotFoundError("unknown document: " + doc_id);
  const auto rows = extract_over_units(*backend_, *doc, unit, prompt_template, schema, attempt_fix,
                                       cfg_.max_attempts, cfg_.chunking);
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) rows_json.push_back(to_json(r));
  const std::string csv_text = export_rows_csv(rows, schema);
  std::string job_id;
  {
    std::lock_guard lock(jobs_mutex_);
    job_id = "job-" + std::to_string(next_job_++);
    const nlohmann::json job = {{"job_id", job_id}, {"doc_id", doc_id}, {"unit", to_string(unit)},
                                {"schema", to_json(schema)}, {"rows", rows_json}, {"csv", csv_text}};
    write_file_atomic(fs::path(cfg_.stores_root) / "jobs" / (job_id + ".json"), job.dump());
  }
  return {{"job_id", job_id}, {"doc_id", doc_id}, {"unit", to_string(unit)}, {"rows", rows_json}};
}

std::string Engine::job_csv(const std::string& job_id) const {
  const bool well_formed = job_id.starts_with("job-") && job_id.size() > 4 &&
                           std::all_of(job_id.begin() + 4, job_id.end(), [](unsigned char c) { return std::isdigit(c); });
  const fs::path file = fs::path(cfg_.stores_root) / "jobs" / (job_id + ".json");
  if (!well_formed || !fs::exists(file)) throw NotFoundError("unknown extraction job: " + job_id);
  return nlohmann::json::parse(read_file(file)).at("csv").get<std::string>();
}

void Engine::delete_document(const std::string& doc_id) {
  std::unique_lock lock(state_mutex_);
  if (!catalog_.contains(doc_id)) throw NotFoundError("unknown document: " + doc_id);
  if (store_ && store_->contains_document(doc_id)) store_->remove_document(doc_id);
  catalog_.erase(doc_id);
  persist_catalog();
}

nlohmann::json Engine::documents() const {
  std::shared_lock lock(state_mutex_);
  std::vector<const DocumentRecord*> docs;
  for (const auto& [_, d] : catalog_) docs.push_back(&d);
  std::sort(docs.begin(), docs.end(), [](const auto* a, const auto* b) { return a->source_path < b->source_path; });
  nlohmann::json out = nlohmann::json::array();
  for (const auto* d : docs) {
    out.push_back({{"doc_id", d->doc_id},
                   {"source_path", d->source_path},
                   {"chunks", store_ ? store_->chunks_of(d->doc_id).size() : 0},
                   {"metadata", d->metadata},
                   {"content_hash", d->content_hash},
                   {"ingested_at", d->ingested_at}});
  }
  return out;
}

nlohmann::json Engine::health() const {
  nlohmann::json store = nullptr;
  {
    std::shared_lock lock(state_mutex_);
    store = {{"kind", store_ ? nlohmann::json(to_string(store_->kind())) : nlohmann::json(nullptr)},
             {"documents", catalog_.size()},
             {"chunks", store_ ? store_->size() : 0},
             {"sparse_chunks", store_ ? store_->sparse_refs().size() : 0},
             {"dense_chunks", store_ ? store_->dense_refs().size() : 0},
             {"embedder", embedder_->id()}};
  }
  const auto& b = backend_->config();
  return {{"status", "ok"},
          {"version", kVersion},
          {"store", store},
          {"backend",
           {{"kind", to_string(b.kind)},
            {"model", b.model},
            {"base_url", opt_json(b.base_url)},
            {"reachable", backend_->reachable()}}},
          {"config", to_json(cfg_)}};
}

ChatSession Engine::read_session(const fs::path& file) const {
  std::istringstream in(read_file(file));
  std::string line;
  ChatSession s;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (!header) {
      s.session_id = j.at("session_id").get<std::string>();
      s.created_at = j.at("created_at").get<std::string>();
      header = true;
      continue;
    }
    s.history.push_back(chat_message_from_json(j));
  }
  if (!header) throw Error("corrupt_file", "session log without header: " + file.string());
  return s;
}

ChatSession Engine::session(const std::string& session_id) const {
  std::lock_guard lock(sessions_mutex_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFoundError("unknown session: " + session_id);
  return it->second;
}

ChatReply Engine::chat(const std::optional<std::string>& session_id, std::string_view message) {
  ChatSession working;
  bool fresh = false;
  {
    std::lock_guard lock(sessions_mutex_);
    if (session_id) {
      const auto it = sessions_.find(*session_id);
      if (it == sessions_.end()) throw NotFoundError("unknown session: " + *session_id);
      working = it->second;
    } else {
      working.session_id = "session-" + std::to_string(next_session_++);
      working.created_at = utc_now_iso8601();
      fresh = true;
    }
    if (!busy_sessions_.insert(working.session_id).second) {
      throw SessionBusyError("a turn is already in progress for " + working.session_id);
    }
  }
  struct Release {
    Engine* self;
    std::string id;
    ~Release() {
      std::lock_guard lock(self->sessions_mutex_);
      self->busy_sessions_.erase(id);
    }
  } release{this, working.session_id};

  const std::size_t before = working.history.size();
  const auto turn = chat_turn(*backend_, working, message, cfg_.context_budget_chars);

  const fs::path file = fs::path(cfg_.stores_root) / "sessions" / (working.session_id + ".jsonl");
  fs::create_directories(file.parent_path());
  {
    std::ofstream out(file, std::ios::binary | std::ios::app);
    if (fresh) out << nlohmann::json{{"event", "session"}, {"session_id", working.session_id}, {"created_at", working.created_at}}.dump() << '\n';
    for (std::size_t i = before; i < working.history.size(); ++i) out << to_json(working.history[i]).dump() << '\n';
    out.flush();
    if (!out) throw Error("io", "cannot persist session " + working.session_id);
  }
  {
    std::lock_guard lock(sessions_mutex_);
    sessions_[working.session_id] = working;
  }
  if (after_persist) after_persist(working.session_id);
  return {working.session_id, turn.reply};
}

}  // namespace docfoundry

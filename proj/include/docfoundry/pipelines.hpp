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
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "docfoundry/dual_store.hpp"
#include "docfoundry/embedder.hpp"
#include "docfoundry/ingest.hpp"
#include "docfoundry/llm.hpp"
#include "docfoundry/structured.hpp"

namespace docfoundry {

// ---------------------------------------------------------------------------
// Summarization

struct SummaryResult {
  std::string summary;
  std::size_t direct_call_count = 0;
  std::size_t map_call_count = 0;
  std::size_t reduce_call_count = 0;
  std::vector<ChunkRef> chunk_refs;       // chunks whose text reached the backend
  std::vector<ChunkRef> skipped_chunks;   // whitespace-only chunks
  bool no_relevant_content = false;       // concept filter selected nothing
  std::optional<std::string> concept_text;

  std::size_t total_calls() const { return direct_call_count + map_call_count + reduce_call_count; }
};

nlohmann::json to_json(const SummaryResult& r);

struct SummarizeOptions {
  std::size_t word_budget = 150;
  std::size_t window_words = 300;  // a document within one window is summarized directly
  std::optional<std::string> focus;
};

/// One direct call for a single-chunk document; otherwise one map call per
/// chunk and reduce calls over the joined partial summaries, regrouped while
/// the joined text exceeds the window.
SummaryResult summarize_map_reduce(Backend& backend, std::span<const Chunk> chunks, const SummarizeOptions& options);

/// The chunks whose embedding has cosine similarity >= min_similarity with
/// the concept, in chunk order.
std::vector<Chunk> select_concept_chunks(const Embedder& embedder, std::span<const Chunk> chunks,
                                         std::string_view concept_text, double min_similarity);

/// Concept filter applied before the map step. Nothing selected gives a
/// no_relevant_content result without backend calls.
SummaryResult summarize_concept(Backend& backend, const Embedder& embedder, std::span<const Chunk> chunks,
                                std::string_view concept_text, double min_similarity = 0.3,
                                SummarizeOptions options = {});

// ---------------------------------------------------------------------------
// Per-unit extraction

struct ExtractionRow {
  std::string doc_id;
  std::size_t unit_index = 0;
  std::string unit_text;
  std::optional<nlohmann::json> record;
  std::size_t attempts_used = 0;
  std::optional<std::string> error;
  std::optional<ValidationReport> report;  // final report of a failed unit

  bool ok() const { return record.has_value(); }
};

nlohmann::json to_json(const ExtractionRow& row);

/// Segments the document and runs extract_structured on each unit, with the
/// unit text substituted into `prompt_template` ({unit_text}; {doc_id} and
/// {source_path} are also available). Per-unit failures are recorded in the
/// row; only transport failures abort.
std::vector<ExtractionRow> extract_over_units(Backend& backend, const DocumentRecord& doc, UnitKind unit,
                                              std::string_view prompt_template, const RecordSchema& schema,
                                              bool attempt_fix, std::size_t max_attempts = 3,
                                              const ChunkingConfig& passage_cfg = {});

/// doc_id, unit_index, unit_text, one column per schema field, attempts_used,
/// error. Arrays are written as JSON text; CRLF line ends.
std::string export_rows_csv(std::span<const ExtractionRow> rows, const RecordSchema& schema);

// ---------------------------------------------------------------------------
// Few-shot classification

struct LabeledText {
  std::string text;
  std::string label;
};

struct FewShotModel {
  std::map<std::string, Eigen::VectorXd> centroids;  // unit norm (zero if every example was blank)
  std::map<std::string, std::size_t> example_counts;
  std::string embedder_id;
};

struct Prediction {
  std::string label;
  double score = 0.0;
};

/// Centroid per label = normalized mean of the example embeddings.
FewShotModel fewshot_train(const Embedder& embedder, std::span<const LabeledText> examples);

/// Nearest centroid by cosine similarity; equal scores go to the
/// lexicographically smallest label.
Prediction fewshot_predict(const FewShotModel& model, const Embedder& embedder, std::string_view text);

/// `text,label` CSV with a header row.
std::vector<LabeledText> read_examples_csv(std::string_view csv_text);

// ---------------------------------------------------------------------------
// Question answering and grounding

class EmptyStoreError : public Error {
 public:
  explicit EmptyStoreError(const std::string& message) : Error("empty_store", message) {}
};

struct Source {
  ChunkRef ref;
  double score = 0.0;
  std::string snippet;  // verbatim prefix of the chunk text
};

struct AnswerWithSources {
  std::string question;
  std::string answer;
  std::vector<Source> sources;
  SearchMode mode = SearchMode::hybrid;
};

nlohmann::json to_json(const AnswerWithSources& a);

std::string ask_prompt(std::string_view question, const std::vector<std::string>& passages);

/// Retrieves the top-k chunks for the question (as free text) and asks the
/// backend to answer from them only.
AnswerWithSources ask(Backend& backend, const DualStore& store, std::string_view question, std::size_t k = 4,
                      SearchMode mode = SearchMode::hybrid, std::size_t snippet_chars = 400);

struct SentenceVerdict {
  std::string sentence;
  Span span;
  double overlap = 0.0;
  bool supported = false;
  std::optional<ChunkRef> best_source;
};

struct GroundingReport {
  double threshold = 0.5;
  bool snippets_verbatim = true;
  std::vector<ChunkRef> non_verbatim_snippets;
  std::vector<SentenceVerdict> sentences;
  std::vector<std::string> unsupported;

  bool all_supported() const { return unsupported.empty(); }
};

nlohmann::json to_json(const GroundingReport& g);

/// Lowercased analyzer terms minus English stopwords.
std::set<std::string> content_words(std::string_view text);

/// |S ∩ C| / |S| for sentence words S and chunk words C; 1 when S is empty.
double content_overlap(const std::set<std::string>& sentence, const std::set<std::string>& chunk);

/// Checks snippets against stored chunks and tags each answer sentence.
/// Citation markers like "[2]" are ignored. Throws NotFoundError for a
/// source missing from the store.
GroundingReport verify_grounding(const AnswerWithSources& answer, const DualStore& store, double threshold = 0.5);

// ---------------------------------------------------------------------------
// Chat

struct ChatSession {
  std::string session_id;
  std::vector<ChatMessage> history;
  std::string created_at;
  std::optional<std::string> system_prompt;
};

nlohmann::json to_json(const ChatSession& s);

/// Longest suffix of `messages` whose contents fit `budget_chars`, trimmed to
/// start at a user message. The last message is always kept.
std::vector<ChatMessage> fit_context(std::span<const ChatMessage> messages, std::size_t budget_chars);

struct ChatTurn {
  std::string reply;
  std::vector<ChatMessage> transmitted;
};

/// Sends the fitted history plus the new message; on success appends both to
/// the session. On failure the session is untouched.
ChatTurn chat_turn(Backend& backend, ChatSession& session, std::string_view user_message,
                   std::size_t context_budget_chars);

}  // namespace docfoundry

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
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "docfoundry/analyzer.hpp"
#include "docfoundry/embedder.hpp"
#include "docfoundry/ingest.hpp"
#include "docfoundry/query.hpp"
#include "docfoundry/types.hpp"

namespace docfoundry {

struct Posting {
  ChunkRef ref;
  std::uint32_t tf = 0;
  std::vector<std::uint32_t> positions;  // strictly increasing
  bool operator==(const Posting&) const = default;
};

struct StoredChunk {
  std::string text;
  std::uint32_t length = 0;  // analysed token count (dl)
  bool operator==(const StoredChunk&) const = default;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Keyword index over chunks. Postings per term are sorted by chunk ref;
/// N and avgdl are recomputed from the stored chunks after every mutation,
/// so equal chunk sets give equal indexes regardless of history.
class InvertedIndex {
 public:
  static constexpr int kFileVersion = 1;

  explicit InvertedIndex(AnalyzerConfig analyzer = {}) : analyzer_(std::move(analyzer)) {}

  /// Adds chunks; throws DuplicateError (leaving the index untouched) if any
  /// chunk ref is already indexed or repeated in `chunks`.
  void add(std::span<const Chunk> chunks);

  /// Removes every chunk of `doc_id`; throws NotFoundError if none indexed.
  void remove_document(const std::string& doc_id);

  const AnalyzerConfig& analyzer() const { return analyzer_; }
  std::size_t size() const { return chunks_.size(); }  // N
  double avgdl() const { return avgdl_; }
  std::size_t df(const std::string& term) const;
  const std::vector<Posting>* postings(const std::string& term) const;
  const std::map<std::string, std::vector<Posting>>& all_postings() const { return postings_; }
  const std::map<ChunkRef, StoredChunk>& chunks() const { return chunks_; }
  const StoredChunk* chunk(const ChunkRef& ref) const;
  bool contains(const ChunkRef& ref) const { return chunks_.contains(ref); }
  bool contains_document(const std::string& doc_id) const;
  std::optional<std::string> field_value(const std::string& field, const ChunkRef& ref) const;
  const std::map<std::string, std::map<ChunkRef, std::string>>& fields() const { return fields_; }

  /// Chunks matching `node` under boolean semantics, sorted by ref.
  /// Throws QuerySyntaxError for a NOT without a positive sibling.
  std::vector<ChunkRef> evaluate(const QueryNode& node) const;

  nlohmann::json to_json() const;
  static InvertedIndex from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(const std::filesystem::path& path);

  bool operator==(const InvertedIndex&) const = default;

 private:
  void recompute_stats();
  std::vector<ChunkRef> term_matches(const std::vector<std::string>& tokens) const;

  AnalyzerConfig analyzer_;
  std::map<ChunkRef, StoredChunk> chunks_;
  std::map<std::string, std::vector<Posting>> postings_;
  std::map<std::string, std::size_t> df_;
  std::map<std::string, std::map<ChunkRef, std::string>> fields_;
  double avgdl_ = 0.0;
};

/// Builds an index; throws InvalidArgumentError for an empty chunk list and
/// DuplicateError for repeated (doc_id, chunk_index).
InvertedIndex index_chunks(std::span<const Chunk> chunks, const AnalyzerConfig& analyzer = {});

/// Returns a copy of `index` without `doc_id`.
InvertedIndex delete_document(InvertedIndex index, const std::string& doc_id);

struct SearchHit {
  ChunkRef ref;
  double score = 0.0;
  std::vector<Span> highlights;
  std::vector<std::string> matched_terms;
  std::optional<double> bm25_score;  // set after semantic re-ranking
};

struct SearchPage {
  std::size_t total = 0;
  std::vector<SearchHit> hits;
};

/// Analysed terms of the positive Term/Phrase leaves, deduplicated, sorted.
std::vector<std::string> scoring_terms(const QueryNode& node, const AnalyzerConfig& analyzer);

/// score = sum over scoring terms of IDF * tf / (tf + k1 * (1 - b + b * dl / avgdl)),
/// IDF = ln(1 + (N - df + 0.5) / (df + 0.5)).
double bm25_score(const InvertedIndex& index, const ChunkRef& ref, const std::vector<std::string>& terms,
                  const Bm25Params& params = {});

/// Boolean candidates ranked by BM25 (ties by ref); page p holds hits [p*k, (p+1)*k).
SearchPage search(const InvertedIndex& index, const QueryNode& query, std::size_t k, std::size_t page = 0,
                  const Bm25Params& params = {});

/// Spans of every analysed occurrence of the given terms, sorted.
std::vector<Span> highlight(std::string_view chunk_text, const std::vector<std::string>& matched_terms,
                            const AnalyzerConfig& analyzer = {});

/// Re-scores the first `m` hits by cosine(query, chunk) with embeddings
/// computed now, re-sorts them and returns only those; the prior score moves
/// to bm25_score.
std::vector<SearchHit> rerank_semantic(const InvertedIndex& index, const std::vector<SearchHit>& hits,
                                       std::string_view query_text, const Embedder& embedder, std::size_t m);

}  // namespace docfoundry

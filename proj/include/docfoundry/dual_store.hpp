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
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "docfoundry/dense_store.hpp"
#include "docfoundry/sparse_index.hpp"

namespace docfoundry {

enum class SearchMode { sparse, dense, hybrid };
enum class StoreKind { sparse, dense, dual };

SearchMode parse_search_mode(std::string_view name);
std::string_view to_string(SearchMode mode);
StoreKind parse_store_kind(std::string_view name);
std::string_view to_string(StoreKind kind);

/// Reciprocal rank fusion: score(d) = sum over lists containing d of
/// 1 / (k_rrf + rank), ranks 1-based. Sorted by score descending, ties by ref.
std::vector<std::pair<ChunkRef, double>> rrf_fuse(const std::vector<std::vector<ChunkRef>>& rankings,
                                                  std::size_t k_rrf = 60);

struct HybridHit {
  ChunkRef ref;
  double fused_score = 0.0;  // BM25 (sparse), cosine similarity (dense) or RRF (hybrid)
  std::optional<std::size_t> sparse_rank;
  std::optional<std::size_t> dense_rank;
  std::optional<double> sparse_score;
  std::optional<double> dense_distance;
  std::vector<Span> highlights;
  std::vector<std::string> matched_terms;
};

struct HybridPage {
  std::size_t total = 0;
  std::vector<HybridHit> hits;
};

struct FieldConstraint {
  std::string field;
  std::string value;
};

struct HybridOptions {
  std::size_t k_rrf = 60;
  std::size_t candidate_factor = 4;  // per-store depth before fusion = factor * k
};

/// Sparse and dense stores kept in parallel over one chunk set.
///
/// Writers hold an exclusive lock for the whole staged commit; searches take
/// a shared lock, so readers never see a half-applied ingest or delete.
class DualStore {
 public:
  static constexpr int kManifestVersion = 1;

  DualStore(StoreKind kind, std::shared_ptr<const Embedder> embedder, AnalyzerConfig analyzer = {},
            HnswParams hnsw = {}, HybridOptions options = {});

  StoreKind kind() const { return kind_; }
  bool has_sparse() const { return kind_ != StoreKind::dense; }
  bool has_dense() const { return kind_ != StoreKind::sparse; }
  const HybridOptions& options() const { return options_; }
  const Embedder& embedder() const { return dense_.embedder(); }

  /// Adds chunks to every bound store or to none: embeddings are computed
  /// first, then both stores are updated on copies and swapped in.
  void ingest(std::span<const Chunk> chunks);

  /// Removes a document from every bound store (dense side is tombstoned).
  void remove_document(const std::string& doc_id);

  std::size_t size() const;
  bool empty() const { return size() == 0; }
  bool contains_document(const std::string& doc_id) const;
  std::optional<Chunk> chunk(const ChunkRef& ref) const;
  std::vector<Chunk> chunks_of(const std::string& doc_id) const;
  std::set<ChunkRef> sparse_refs() const;
  std::set<ChunkRef> dense_refs() const;

  /// `query` drives the sparse side; `dense_text` is embedded for the dense side.
  HybridPage hybrid_search(const QueryNode& query, std::string_view dense_text, std::size_t k, SearchMode mode,
                           const std::vector<FieldConstraint>& filters = {}, std::size_t page = 0) const;

  /// Parses `query_text` with the boolean grammar (sparse/hybrid) and embeds
  /// its positive words (dense/hybrid).
  HybridPage search(std::string_view query_text, std::size_t k, SearchMode mode,
                    const std::vector<FieldConstraint>& filters = {}, std::size_t page = 0) const;

  /// Like search() but treats `text` as free text (OR of its terms).
  HybridPage search_free_text(std::string_view text, std::size_t k, SearchMode mode) const;

  /// Writes manifest.json plus sub-store files into `dir`.
  void save(const std::filesystem::path& dir) const;
  static std::unique_ptr<DualStore> load(const std::filesystem::path& dir);

  // Read-only views; callers must not hold them across mutations.
  const InvertedIndex& sparse_unlocked() const { return sparse_; }
  const DenseStore& dense_unlocked() const { return dense_; }

 private:
  void require(SearchMode mode) const;

  StoreKind kind_;
  HybridOptions options_;
  InvertedIndex sparse_;
  DenseStore dense_;
  std::map<ChunkRef, Chunk> chunks_;
  mutable std::shared_mutex mutex_;
};

}  // namespace docfoundry

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
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "docfoundry/embedder.hpp"
#include "docfoundry/hnsw.hpp"
#include "docfoundry/ingest.hpp"

namespace docfoundry {

/// Embedder + HNSW graph. Deleted documents are tombstoned: their nodes stay
/// in the graph for traversal but never appear in results.
class DenseStore {
 public:
  using Filter = std::function<bool(const ChunkRef&)>;

  explicit DenseStore(std::shared_ptr<const Embedder> embedder, HnswParams params = {});

  const Embedder& embedder() const { return *embedder_; }
  std::shared_ptr<const Embedder> embedder_ptr() const { return embedder_; }
  const HnswIndex<float>& index() const { return index_; }

  std::vector<Embedding> embed_chunks(std::span<const Chunk> chunks) const;

  /// Inserts pre-computed embeddings; throws DuplicateError (before any
  /// mutation) if a chunk is already live or repeated.
  void add_embedded(std::span<const Chunk> chunks, std::span<const Embedding> vectors);
  void add(std::span<const Chunk> chunks) { add_embedded(chunks, embed_chunks(chunks)); }

  /// Tombstones every live chunk of `doc_id`; throws NotFoundError if none.
  void remove_document(const std::string& doc_id);

  bool contains(const ChunkRef& ref) const;
  std::size_t live_size() const { return index_.size() - tombstones_.size(); }
  std::set<ChunkRef> live_refs() const;
  const std::set<ChunkRef>& tombstones() const { return tombstones_; }

  /// k nearest live chunks. With a filter the search is exhaustive over the
  /// graph so filtered results stay exact. Throws EmptyIndexError when no
  /// live chunk exists.
  std::vector<NnHit> search_vector(const Embedding& query, std::size_t k, std::size_t ef = 0,
                                   const Filter& filter = {}) const;
  std::vector<NnHit> search(std::string_view text, std::size_t k, std::size_t ef = 0,
                            const Filter& filter = {}) const {
    return search_vector(embedder_->embed(text), k, ef, filter);
  }

  /// Writes the graph to `path` and tombstones to `path` + ".tombstones.json".
  void save(const std::filesystem::path& path) const;
  static DenseStore load(const std::filesystem::path& path, std::shared_ptr<const Embedder> embedder);

 private:
  std::shared_ptr<const Embedder> embedder_;
  HnswIndex<float> index_;
  std::set<ChunkRef> tombstones_;
};

}  // namespace docfoundry

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

#include "docfoundry/dense_store.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace docfoundry {

DenseStore::DenseStore(std::shared_ptr<const Embedder> embedder, HnswParams params)
    : embedder_(std::move(embedder)), index_(embedder_ ? embedder_->dim() : 0, params) {
  if (!embedder_) throw InvalidArgumentError("dense store needs an embedder");
}

std::vector<Embedding> DenseStore::embed_chunks(std::span<const Chunk> chunks) const {
  std::vector<std::string> texts;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) texts.push_back(c.text);
  auto vectors = embedder_->embed_batch(texts);
  if (vectors.size() != chunks.size()) throw EmbedderError("embedder returned wrong vector count");
  return vectors;
}

void DenseStore::add_embedded(std::span<const Chunk> chunks, std::span<const Embedding> vectors) {
  if (chunks.size() != vectors.size()) throw InvalidArgumentError("chunk/vector count mismatch");
  std::set<ChunkRef> incoming;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const ChunkRef ref = chunks[i].ref();
    if (contains(ref) || !incoming.insert(ref).second) throw DuplicateError("chunk already in dense store: " + ref.str());
    if (static_cast<std::size_t>(vectors[i].size()) != index_.dim()) {
      throw InvalidArgumentError("embedding dimension mismatch for " + ref.str());
    }
    // A tombstoned ref can only come back with the same content (doc ids hash the content).
    if (const auto node = index_.find(ref); node && index_.vector(*node) != vectors[i]) {
      throw DuplicateError("tombstoned chunk re-added with different content: " + ref.str());
    }
  }
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const ChunkRef ref = chunks[i].ref();
    if (tombstones_.erase(ref) == 0) index_.insert(ref, vectors[i]);
  }
}

void DenseStore::remove_document(const std::string& doc_id) {
  std::vector<ChunkRef> doomed;
  for (const auto& ref : live_refs()) {
    if (ref.doc_id == doc_id) doomed.push_back(ref);
  }
  if (doomed.empty()) throw NotFoundError("unknown document: " + doc_id);
  tombstones_.insert(doomed.begin(), doomed.end());
}

bool DenseStore::contains(const ChunkRef& ref) const { return index_.find(ref) && !tombstones_.contains(ref); }

std::set<ChunkRef> DenseStore::live_refs() const {
  std::set<ChunkRef> refs;
  for (std::uint32_t i = 0; i < index_.size(); ++i) {
    if (!tombstones_.contains(index_.label(i))) refs.insert(index_.label(i));
  }
  return refs;
}

std::vector<NnHit> DenseStore::search_vector(const Embedding& query, std::size_t k, std::size_t ef,
                                             const Filter& filter) const {
  if (live_size() == 0) throw EmptyIndexError("dense store is empty");
  if (k == 0) throw InvalidArgumentError("k must be positive");
  std::size_t want = k + tombstones_.size();
  if (filter) want = index_.size();
  want = std::min(want, index_.size());
  const std::size_t effective_ef = std::max({ef == 0 ? index_.params().ef_search : ef, want, k});
  auto hits = index_.search(query, want, filter ? index_.size() : effective_ef);
  std::erase_if(hits, [&](const NnHit& h) { return tombstones_.contains(h.ref) || (filter && !filter(h.ref)); });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

void DenseStore::save(const std::filesystem::path& path) const {
  index_.save(path);
  nlohmann::json j = nlohmann::json::array();
  for (const auto& ref : tombstones_) j.push_back(ref.str());
  std::ofstream out(path.string() + ".tombstones.json", std::ios::trunc);
  out << j.dump();
  if (!out) throw Error("io", "cannot write dense tombstones");
}

DenseStore DenseStore::load(const std::filesystem::path& path, std::shared_ptr<const Embedder> embedder) {
  DenseStore store(std::move(embedder));
  store.index_ = HnswIndex<float>::load(path);
  if (store.index_.dim() != store.embedder_->dim()) {
    throw InvalidArgumentError("dense index dimension does not match embedder");
  }
  std::ifstream in(path.string() + ".tombstones.json");
  if (in) {
    std::stringstream ss;
    ss << in.rdbuf();
    for (const auto& s : nlohmann::json::parse(ss.str())) store.tombstones_.insert(ChunkRef::parse(s.get<std::string>()));
  }
  return store;
}

}  // namespace docfoundry

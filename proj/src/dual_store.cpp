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

#include "docfoundry/dual_store.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

namespace docfoundry {

namespace fs = std::filesystem;

SearchMode parse_search_mode(std::string_view name) {
  if (name == "sparse" || name == "keyword") return SearchMode::sparse;
  if (name == "dense" || name == "semantic") return SearchMode::dense;
  if (name == "hybrid") return SearchMode::hybrid;
  throw InvalidArgumentError("unknown search mode: " + std::string(name));
}

std::string_view to_string(SearchMode mode) {
  switch (mode) {
    case SearchMode::sparse: return "sparse";
    case SearchMode::dense: return "dense";
    case SearchMode::hybrid: return "hybrid";
  }
  return "hybrid";
}

StoreKind parse_store_kind(std::string_view name) {
  if (name == "sparse") return StoreKind::sparse;
  if (name == "dense") return StoreKind::dense;
  if (name == "dual") return StoreKind::dual;
  throw InvalidArgumentError("unknown store kind: " + std::string(name));
}

std::string_view to_string(StoreKind kind) {
  switch (kind) {
    case StoreKind::sparse: return "sparse";
    case StoreKind::dense: return "dense";
    case StoreKind::dual: return "dual";
  }
  return "dual";
}

std::vector<std::pair<ChunkRef, double>> rrf_fuse(const std::vector<std::vector<ChunkRef>>& rankings,
                                                  std::size_t k_rrf) {
  std::map<ChunkRef, double> scores;
  for (const auto& list : rankings) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      scores[list[i]] += 1.0 / static_cast<double>(k_rrf + i + 1);
    }
  }
  std::vector<std::pair<ChunkRef, double>> fused(scores.begin(), scores.end());
  std::stable_sort(fused.begin(), fused.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return fused;
}

DualStore::DualStore(StoreKind kind, std::shared_ptr<const Embedder> embedder, AnalyzerConfig analyzer,
                     HnswParams hnsw, HybridOptions options)
    : kind_(kind), options_(options), sparse_(std::move(analyzer)), dense_(std::move(embedder), hnsw) {
  if (options_.candidate_factor == 0) throw InvalidArgumentError("candidate_factor must be positive");
}

void DualStore::ingest(std::span<const Chunk> chunks) {
  {
    std::shared_lock lock(mutex_);
    for (const auto& c : chunks) {
      if (chunks_.contains(c.ref())) throw DuplicateError("chunk already ingested: " + c.ref().str());
    }
  }
  std::vector<Embedding> vectors;
  if (has_dense()) vectors = dense_.embed_chunks(chunks);

  std::unique_lock lock(mutex_);
  InvertedIndex staged_sparse = sparse_;
  DenseStore staged_dense = dense_;
  if (has_sparse()) staged_sparse.add(chunks);
  if (has_dense()) staged_dense.add_embedded(chunks, vectors);
  auto staged_chunks = chunks_;
  for (const auto& c : chunks) {
    if (!staged_chunks.emplace(c.ref(), c).second) throw DuplicateError("chunk already ingested: " + c.ref().str());
  }
  sparse_ = std::move(staged_sparse);
  dense_ = std::move(staged_dense);
  chunks_ = std::move(staged_chunks);
}

void DualStore::remove_document(const std::string& doc_id) {
  std::unique_lock lock(mutex_);
  const auto first = chunks_.lower_bound(ChunkRef{doc_id, 0});
  if (first == chunks_.end() || first->first.doc_id != doc_id) throw NotFoundError("unknown document: " + doc_id);
  InvertedIndex staged_sparse = sparse_;
  DenseStore staged_dense = dense_;
  if (has_sparse()) staged_sparse.remove_document(doc_id);
  if (has_dense()) staged_dense.remove_document(doc_id);
  sparse_ = std::move(staged_sparse);
  dense_ = std::move(staged_dense);
  std::erase_if(chunks_, [&](const auto& kv) { return kv.first.doc_id == doc_id; });
}

std::size_t DualStore::size() const {
  std::shared_lock lock(mutex_);
  return chunks_.size();
}

bool DualStore::contains_document(const std::string& doc_id) const {
  std::shared_lock lock(mutex_);
  const auto it = chunks_.lower_bound(ChunkRef{doc_id, 0});
  return it != chunks_.end() && it->first.doc_id == doc_id;
}

std::optional<Chunk> DualStore::chunk(const ChunkRef& ref) const {
  std::shared_lock lock(mutex_);
  const auto it = chunks_.find(ref);
  return it == chunks_.end() ? std::nullopt : std::optional<Chunk>(it->second);
}

std::vector<Chunk> DualStore::chunks_of(const std::string& doc_id) const {
  std::shared_lock lock(mutex_);
  std::vector<Chunk> out;
  for (auto it = chunks_.lower_bound(ChunkRef{doc_id, 0}); it != chunks_.end() && it->first.doc_id == doc_id; ++it) {
    out.push_back(it->second);
  }
  return out;
}

std::set<ChunkRef> DualStore::sparse_refs() const {
  std::shared_lock lock(mutex_);
  std::set<ChunkRef> refs;
  for (const auto& [ref, c] : sparse_.chunks()) refs.insert(ref);
  return refs;
}

std::set<ChunkRef> DualStore::dense_refs() const {
  std::shared_lock lock(mutex_);
  return dense_.live_refs();
}

void DualStore::require(SearchMode mode) const {
  if ((mode != SearchMode::dense && !has_sparse()) || (mode != SearchMode::sparse && !has_dense())) {
    throw Error("store_unavailable", std::string(to_string(mode)) + " search needs a " +
                                         (mode == SearchMode::dense ? "dense" : "sparse") + " store; this store is " +
                                         std::string(to_string(kind_)));
  }
}

HybridPage DualStore::hybrid_search(const QueryNode& query, std::string_view dense_text, std::size_t k,
                                    SearchMode mode, const std::vector<FieldConstraint>& filters,
                                    std::size_t page) const {
  if (k == 0) throw InvalidArgumentError("k must be positive");
  std::shared_lock lock(mutex_);
  if (chunks_.empty()) throw EmptyIndexError("store is empty");
  require(mode);

  QueryNode sparse_query = query;
  if (!filters.empty()) {
    std::vector<QueryNode> parts{query};
    for (const auto& f : filters) parts.push_back(QueryNode::field_filter(f.field, f.value));
    sparse_query = QueryNode::all_of(std::move(parts));
  }
  // Top-level field conjuncts of the query constrain the dense side too.
  std::vector<FieldConstraint> constraints = filters;
  if (query.kind == QueryNode::Kind::field) constraints.push_back({query.field, query.text});
  if (query.kind == QueryNode::Kind::all_of) {
    for (const auto& c : query.children) {
      if (c.kind == QueryNode::Kind::field) constraints.push_back({c.field, c.text});
    }
  }
  const auto passes = [&](const ChunkRef& ref) {
    const auto it = chunks_.find(ref);
    if (it == chunks_.end()) return false;
    return std::all_of(constraints.begin(), constraints.end(), [&](const FieldConstraint& f) {
      const auto v = it->second.metadata.find(f.field);
      return v != it->second.metadata.end() && v->second == f.value;
    });
  };
  const DenseStore::Filter dense_filter = constraints.empty() ? DenseStore::Filter{} : DenseStore::Filter(passes);
  const std::size_t wanted = (page + 1) * k;
  const std::size_t begin = page * k;

  HybridPage out;
  if (mode == SearchMode::sparse) {
    const auto sp = docfoundry::search(sparse_, sparse_query, k, page);
    out.total = sp.total;
    for (std::size_t i = 0; i < sp.hits.size(); ++i) {
      const auto& h = sp.hits[i];
      HybridHit hit;
      hit.ref = h.ref;
      hit.fused_score = h.score;
      hit.sparse_rank = begin + i + 1;
      hit.sparse_score = h.score;
      hit.highlights = h.highlights;
      hit.matched_terms = h.matched_terms;
      out.hits.push_back(std::move(hit));
    }
    return out;
  }

  if (mode == SearchMode::dense) {
    const auto dn = dense_.search(dense_text, wanted, 0, dense_filter);
    out.total = static_cast<std::size_t>(std::count_if(
        chunks_.begin(), chunks_.end(), [&](const auto& kv) { return dense_.contains(kv.first) && passes(kv.first); }));
    for (std::size_t i = begin; i < dn.size(); ++i) {
      HybridHit hit;
      hit.ref = dn[i].ref;
      hit.fused_score = 1.0 - dn[i].distance;
      hit.dense_rank = i + 1;
      hit.dense_distance = dn[i].distance;
      out.hits.push_back(std::move(hit));
    }
    return out;
  }

  const std::size_t depth = options_.candidate_factor * wanted;
  const auto sp = docfoundry::search(sparse_, sparse_query, depth, 0);
  const auto dn = dense_.search(dense_text, depth, 0, dense_filter);
  std::vector<ChunkRef> sparse_list, dense_list;
  std::map<ChunkRef, std::pair<std::size_t, double>> sparse_info;
  std::map<ChunkRef, std::pair<std::size_t, double>> dense_info;
  for (std::size_t i = 0; i < sp.hits.size(); ++i) {
    sparse_list.push_back(sp.hits[i].ref);
    sparse_info[sp.hits[i].ref] = {i + 1, sp.hits[i].score};
  }
  for (std::size_t i = 0; i < dn.size(); ++i) {
    dense_list.push_back(dn[i].ref);
    dense_info[dn[i].ref] = {i + 1, dn[i].distance};
  }
  const auto fused = rrf_fuse({sparse_list, dense_list}, options_.k_rrf);

  std::set<ChunkRef> reachable(sparse_list.begin(), sparse_list.end());
  for (const auto& ref : sparse_.evaluate(sparse_query)) reachable.insert(ref);
  for (const auto& [ref, c] : chunks_) {
    if (dense_.contains(ref) && passes(ref)) reachable.insert(ref);
  }
  out.total = reachable.size();

  const auto terms = scoring_terms(query, sparse_.analyzer());
  for (std::size_t i = begin; i < fused.size() && i < wanted; ++i) {
    HybridHit hit;
    hit.ref = fused[i].first;
    hit.fused_score = fused[i].second;
    if (const auto s = sparse_info.find(hit.ref); s != sparse_info.end()) {
      hit.sparse_rank = s->second.first;
      hit.sparse_score = s->second.second;
    }
    if (const auto d = dense_info.find(hit.ref); d != dense_info.end()) {
      hit.dense_rank = d->second.first;
      hit.dense_distance = d->second.second;
    }
    const std::string& text = chunks_.at(hit.ref).text;
    std::set<std::string> present;
    for (const auto& t : analyze(text, sparse_.analyzer())) present.insert(t.term);
    for (const auto& t : terms) {
      if (present.contains(t)) hit.matched_terms.push_back(t);
    }
    hit.highlights = highlight(text, hit.matched_terms, sparse_.analyzer());
    out.hits.push_back(std::move(hit));
  }
  return out;
}

HybridPage DualStore::search(std::string_view query_text, std::size_t k, SearchMode mode,
                             const std::vector<FieldConstraint>& filters, std::size_t page) const {
  if (mode == SearchMode::dense) {
    // Dense queries are free text; the boolean grammar is not applied.
    return hybrid_search(QueryNode::term(std::string(query_text)), query_text, k, mode, filters, page);
  }
  const QueryNode query = parse_query(query_text);
  return hybrid_search(query, positive_text(query), k, mode, filters, page);
}

HybridPage DualStore::search_free_text(std::string_view text, std::size_t k, SearchMode mode) const {
  if (mode == SearchMode::dense) return hybrid_search(QueryNode::term(std::string(text)), text, k, mode);
  return hybrid_search(free_text_query(text), text, k, mode);
}

void DualStore::save(const fs::path& dir) const {
  std::shared_lock lock(mutex_);
  fs::create_directories(dir);
  std::vector<Chunk> all;
  all.reserve(chunks_.size());
  for (const auto& [ref, c] : chunks_) all.push_back(c);
  write_chunks_jsonl(dir / "chunks.jsonl", all);
  if (has_sparse()) sparse_.save(dir / "sparse.json");
  if (has_dense()) dense_.save(dir / "dense.hnsw");
  const auto& p = dense_.index().params();
  const nlohmann::json manifest = {
      {"version", kManifestVersion},
      {"store_kind", to_string(kind_)},
      {"chunks", "chunks.jsonl"},
      {"sparse_index", has_sparse() ? nlohmann::json("sparse.json") : nlohmann::json(nullptr)},
      {"dense_index", has_dense() ? nlohmann::json("dense.hnsw") : nlohmann::json(nullptr)},
      {"embedder", dense_.embedder().id()},
      {"analyzer", {{"lowercase", sparse_.analyzer().lowercase}, {"stopwords", sparse_.analyzer().stopwords}}},
      {"hnsw", {{"M", p.M}, {"ef_construction", p.ef_construction}, {"ef_search", p.ef_search}, {"seed", p.seed}}},
      {"k_rrf", options_.k_rrf},
      {"candidate_factor", options_.candidate_factor}};
  const fs::path tmp = dir / "manifest.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) throw Error("io", "cannot write manifest");
  }
  fs::rename(tmp, dir / "manifest.json");
}

std::unique_ptr<DualStore> DualStore::load(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw NotFoundError("no store manifest in " + dir.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto m = nlohmann::json::parse(ss.str());
  if (m.at("version").get<int>() != kManifestVersion) throw VersionMismatchError("unsupported store manifest version");
  AnalyzerConfig analyzer;
  analyzer.lowercase = m.at("analyzer").at("lowercase").get<bool>();
  analyzer.stopwords = m.at("analyzer").at("stopwords").get<std::set<std::string>>();
  HnswParams hp;
  hp.M = m.at("hnsw").at("M").get<std::size_t>();
  hp.ef_construction = m.at("hnsw").at("ef_construction").get<std::size_t>();
  hp.ef_search = m.at("hnsw").at("ef_search").get<std::size_t>();
  hp.seed = m.at("hnsw").at("seed").get<std::uint64_t>();
  HybridOptions opts{m.at("k_rrf").get<std::size_t>(), m.at("candidate_factor").get<std::size_t>()};
  auto embedder = make_embedder(m.at("embedder").get<std::string>());
  auto store = std::make_unique<DualStore>(parse_store_kind(m.at("store_kind").get<std::string>()), embedder,
                                           analyzer, hp, opts);
  for (auto& c : read_chunks_jsonl(dir / m.at("chunks").get<std::string>())) {
    const ChunkRef ref = c.ref();
    store->chunks_.emplace(ref, std::move(c));
  }
  if (store->has_sparse()) store->sparse_ = InvertedIndex::load(dir / m.at("sparse_index").get<std::string>());
  if (store->has_dense()) store->dense_ = DenseStore::load(dir / m.at("dense_index").get<std::string>(), embedder);
  return store;
}

}  // namespace docfoundry

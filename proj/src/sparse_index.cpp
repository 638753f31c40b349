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

#include "docfoundry/sparse_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace docfoundry {

namespace {

std::vector<ChunkRef> intersect(const std::vector<ChunkRef>& a, const std::vector<ChunkRef>& b) {
  std::vector<ChunkRef> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<ChunkRef> unite(const std::vector<ChunkRef>& a, const std::vector<ChunkRef>& b) {
  std::vector<ChunkRef> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<ChunkRef> subtract(const std::vector<ChunkRef>& a, const std::vector<ChunkRef>& b) {
  std::vector<ChunkRef> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

const Posting* find_posting(const std::vector<Posting>& list, const ChunkRef& ref) {
  const auto it = std::lower_bound(list.begin(), list.end(), ref,
                                   [](const Posting& p, const ChunkRef& r) { return p.ref < r; });
  return it != list.end() && it->ref == ref ? &*it : nullptr;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) {
    if (!s.empty()) s += ' ';
    s += w;
  }
  return s;
}

void collect_scoring(const QueryNode& node, const AnalyzerConfig& analyzer, std::set<std::string>& out) {
  switch (node.kind) {
    case QueryNode::Kind::term:
      for (auto& t : analyze_terms(node.text, analyzer)) out.insert(std::move(t));
      break;
    case QueryNode::Kind::phrase:
      for (auto& t : analyze_terms(join_words(node.words), analyzer)) out.insert(std::move(t));
      break;
    case QueryNode::Kind::field:
    case QueryNode::Kind::negate:
      break;
    default:
      for (const auto& c : node.children) collect_scoring(c, analyzer, out);
  }
}

}  // namespace

void InvertedIndex::add(std::span<const Chunk> chunks) {
  std::set<ChunkRef> incoming;
  for (const auto& c : chunks) {
    const ChunkRef ref = c.ref();
    if (chunks_.contains(ref) || !incoming.insert(ref).second) {
      throw DuplicateError("chunk already indexed: " + ref.str());
    }
  }
  for (const auto& c : chunks) {
    const ChunkRef ref = c.ref();
    const auto tokens = analyze(c.text, analyzer_);
    std::map<std::string, std::vector<std::uint32_t>> positions;
    for (const auto& t : tokens) positions[t.term].push_back(static_cast<std::uint32_t>(t.position));
    for (auto& [term, pos] : positions) {
      auto& list = postings_[term];
      Posting p{ref, static_cast<std::uint32_t>(pos.size()), std::move(pos)};
      const auto it = std::lower_bound(list.begin(), list.end(), ref,
                                       [](const Posting& x, const ChunkRef& r) { return x.ref < r; });
      list.insert(it, std::move(p));
    }
    for (const auto& [key, value] : c.metadata) fields_[key][ref] = value;
    chunks_[ref] = StoredChunk{c.text, static_cast<std::uint32_t>(tokens.size())};
  }
  recompute_stats();
}

void InvertedIndex::remove_document(const std::string& doc_id) {
  std::set<ChunkRef> doomed;
  for (auto it = chunks_.lower_bound(ChunkRef{doc_id, 0}); it != chunks_.end() && it->first.doc_id == doc_id; ++it) {
    doomed.insert(it->first);
  }
  if (doomed.empty()) throw NotFoundError("unknown document: " + doc_id);
  for (auto it = postings_.begin(); it != postings_.end();) {
    auto& list = it->second;
    std::erase_if(list, [&](const Posting& p) { return doomed.contains(p.ref); });
    it = list.empty() ? postings_.erase(it) : std::next(it);
  }
  for (auto it = fields_.begin(); it != fields_.end();) {
    for (const auto& ref : doomed) it->second.erase(ref);
    it = it->second.empty() ? fields_.erase(it) : std::next(it);
  }
  for (const auto& ref : doomed) chunks_.erase(ref);
  recompute_stats();
}

void InvertedIndex::recompute_stats() {
  df_.clear();
  for (const auto& [term, list] : postings_) df_[term] = list.size();
  double total = 0.0;
  for (const auto& [ref, c] : chunks_) total += c.length;
  avgdl_ = chunks_.empty() ? 0.0 : total / static_cast<double>(chunks_.size());
}

std::size_t InvertedIndex::df(const std::string& term) const {
  const auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

const std::vector<Posting>* InvertedIndex::postings(const std::string& term) const {
  const auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

const StoredChunk* InvertedIndex::chunk(const ChunkRef& ref) const {
  const auto it = chunks_.find(ref);
  return it == chunks_.end() ? nullptr : &it->second;
}

bool InvertedIndex::contains_document(const std::string& doc_id) const {
  const auto it = chunks_.lower_bound(ChunkRef{doc_id, 0});
  return it != chunks_.end() && it->first.doc_id == doc_id;
}

std::optional<std::string> InvertedIndex::field_value(const std::string& field, const ChunkRef& ref) const {
  const auto f = fields_.find(field);
  if (f == fields_.end()) return std::nullopt;
  const auto v = f->second.find(ref);
  if (v == f->second.end()) return std::nullopt;
  return v->second;
}

std::vector<ChunkRef> InvertedIndex::term_matches(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) return {};
  std::vector<const std::vector<Posting>*> lists;
  for (const auto& t : tokens) {
    const auto* list = postings(t);
    if (list == nullptr) return {};
    lists.push_back(list);
  }
  std::vector<ChunkRef> out;
  for (const auto& first : *lists.front()) {
    std::vector<const Posting*> rest;
    bool all = true;
    for (std::size_t i = 1; i < lists.size() && all; ++i) {
      const Posting* p = find_posting(*lists[i], first.ref);
      all = p != nullptr;
      rest.push_back(p);
    }
    if (!all) continue;
    const bool adjacent = std::any_of(first.positions.begin(), first.positions.end(), [&](std::uint32_t start) {
      for (std::size_t i = 0; i < rest.size(); ++i) {
        const auto want = start + static_cast<std::uint32_t>(i + 1);
        if (!std::binary_search(rest[i]->positions.begin(), rest[i]->positions.end(), want)) return false;
      }
      return true;
    });
    if (adjacent) out.push_back(first.ref);
  }
  return out;
}

std::vector<ChunkRef> InvertedIndex::evaluate(const QueryNode& node) const {
  switch (node.kind) {
    case QueryNode::Kind::term:
      return term_matches(analyze_terms(node.text, analyzer_));
    case QueryNode::Kind::phrase:
      return term_matches(analyze_terms(join_words(node.words), analyzer_));
    case QueryNode::Kind::field: {
      std::vector<ChunkRef> out;
      const auto f = fields_.find(node.field);
      if (f == fields_.end()) return out;
      for (const auto& [ref, value] : f->second) {
        if (value == node.text) out.push_back(ref);
      }
      return out;
    }
    case QueryNode::Kind::all_of: {
      std::optional<std::vector<ChunkRef>> acc;
      std::vector<const QueryNode*> negatives;
      for (const auto& c : node.children) {
        if (c.kind == QueryNode::Kind::negate) {
          negatives.push_back(&c.children.front());
          continue;
        }
        auto m = evaluate(c);
        acc = acc ? intersect(*acc, m) : std::move(m);
      }
      if (!acc) throw QuerySyntaxError("NOT requires a positive sibling under AND", node.position);
      for (const auto* n : negatives) acc = subtract(*acc, evaluate(*n));
      return *acc;
    }
    case QueryNode::Kind::any_of: {
      std::vector<ChunkRef> acc;
      for (const auto& c : node.children) {
        if (c.kind == QueryNode::Kind::negate) {
          throw QuerySyntaxError("NOT requires a positive sibling under AND", c.position);
        }
        acc = unite(acc, evaluate(c));
      }
      return acc;
    }
    case QueryNode::Kind::negate:
      throw QuerySyntaxError("NOT requires a positive sibling under AND", node.position);
  }
  return {};
}

nlohmann::json InvertedIndex::to_json() const {
  nlohmann::json postings = nlohmann::json::object();
  for (const auto& [term, list] : postings_) {
    auto& arr = postings[term] = nlohmann::json::array();
    for (const auto& p : list) arr.push_back({{"chunk_ref", p.ref.str()}, {"tf", p.tf}, {"positions", p.positions}});
  }
  nlohmann::json fields = nlohmann::json::object();
  for (const auto& [name, values] : fields_) {
    auto& obj = fields[name] = nlohmann::json::object();
    for (const auto& [ref, v] : values) obj[ref.str()] = v;
  }
  nlohmann::json chunks = nlohmann::json::object();
  for (const auto& [ref, c] : chunks_) chunks[ref.str()] = {{"text", c.text}, {"dl", c.length}};
  return {{"version", kFileVersion},
          {"analyzer", {{"lowercase", analyzer_.lowercase}, {"stopwords", analyzer_.stopwords}}},
          {"N", chunks_.size()},
          {"avgdl", avgdl_},
          {"df", df_},
          {"postings", std::move(postings)},
          {"fields", std::move(fields)},
          {"chunks", std::move(chunks)}};
}

InvertedIndex InvertedIndex::from_json(const nlohmann::json& j) {
  const int version = j.at("version").get<int>();
  if (version != kFileVersion) {
    throw VersionMismatchError("sparse index version " + std::to_string(version) + ", expected " +
                               std::to_string(kFileVersion));
  }
  AnalyzerConfig analyzer;
  analyzer.lowercase = j.at("analyzer").at("lowercase").get<bool>();
  analyzer.stopwords = j.at("analyzer").at("stopwords").get<std::set<std::string>>();
  InvertedIndex index(analyzer);
  for (const auto& [key, c] : j.at("chunks").items()) {
    index.chunks_[ChunkRef::parse(key)] = StoredChunk{c.at("text").get<std::string>(), c.at("dl").get<std::uint32_t>()};
  }
  for (const auto& [term, arr] : j.at("postings").items()) {
    auto& list = index.postings_[term];
    for (const auto& p : arr) {
      list.push_back(Posting{ChunkRef::parse(p.at("chunk_ref").get<std::string>()), p.at("tf").get<std::uint32_t>(),
                             p.at("positions").get<std::vector<std::uint32_t>>()});
    }
  }
  for (const auto& [name, values] : j.at("fields").items()) {
    for (const auto& [key, v] : values.items()) index.fields_[name][ChunkRef::parse(key)] = v.get<std::string>();
  }
  index.recompute_stats();
  if (index.chunks_.size() != j.at("N").get<std::size_t>()) {
    throw Error("corrupt_file", "sparse index N does not match stored chunks");
  }
  return index;
}

void InvertedIndex::save(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + tmp.string());
    out << to_json().dump();
  }
  std::filesystem::rename(tmp, path);
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(nlohmann::json::parse(ss.str()));
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt_file", path.string() + ": " + e.what());
  }
}

InvertedIndex index_chunks(std::span<const Chunk> chunks, const AnalyzerConfig& analyzer) {
  if (chunks.empty()) throw InvalidArgumentError("index_chunks needs at least one chunk");
  InvertedIndex index(analyzer);
  index.add(chunks);
  return index;
}

InvertedIndex delete_document(InvertedIndex index, const std::string& doc_id) {
  index.remove_document(doc_id);
  return index;
}

std::vector<std::string> scoring_terms(const QueryNode& node, const AnalyzerConfig& analyzer) {
  std::set<std::string> terms;
  collect_scoring(node, analyzer, terms);
  return {terms.begin(), terms.end()};
}

double bm25_score(const InvertedIndex& index, const ChunkRef& ref, const std::vector<std::string>& terms,
                  const Bm25Params& params) {
  const StoredChunk* chunk = index.chunk(ref);
  if (chunk == nullptr || index.size() == 0) return 0.0;
  const auto n = static_cast<double>(index.size());
  const double norm = params.k1 * (1.0 - params.b + params.b * chunk->length / index.avgdl());
  double score = 0.0;
  for (const auto& term : terms) {
    const auto* list = index.postings(term);
    if (list == nullptr) continue;
    const Posting* p = find_posting(*list, ref);
    if (p == nullptr) continue;
    const auto df = static_cast<double>(list->size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    score += idf * p->tf / (p->tf + norm);
  }
  return score;
}

SearchPage search(const InvertedIndex& index, const QueryNode& query, std::size_t k, std::size_t page,
                  const Bm25Params& params) {
  if (k == 0) throw InvalidArgumentError("k must be positive");
  const auto candidates = index.evaluate(query);
  const auto terms = scoring_terms(query, index.analyzer());
  std::vector<std::pair<double, ChunkRef>> scored;
  scored.reserve(candidates.size());
  for (const auto& ref : candidates) scored.emplace_back(bm25_score(index, ref, terms, params), ref);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  SearchPage out;
  out.total = scored.size();
  const std::size_t begin = std::min(scored.size(), page * k);
  const std::size_t end = std::min(scored.size(), begin + k);
  for (std::size_t i = begin; i < end; ++i) {
    SearchHit hit;
    hit.ref = scored[i].second;
    hit.score = scored[i].first;
    for (const auto& t : terms) {
      const auto* list = index.postings(t);
      if (list != nullptr && find_posting(*list, hit.ref) != nullptr) hit.matched_terms.push_back(t);
    }
    hit.highlights = highlight(index.chunk(hit.ref)->text, hit.matched_terms, index.analyzer());
    out.hits.push_back(std::move(hit));
  }
  return out;
}

std::vector<Span> highlight(std::string_view chunk_text, const std::vector<std::string>& matched_terms,
                            const AnalyzerConfig& analyzer) {
  std::vector<Span> spans;
  if (matched_terms.empty()) return spans;
  const std::set<std::string> wanted(matched_terms.begin(), matched_terms.end());
  for (const auto& t : analyze(chunk_text, analyzer)) {
    if (wanted.contains(t.term)) spans.push_back({t.start, t.end});
  }
  return spans;
}

std::vector<SearchHit> rerank_semantic(const InvertedIndex& index, const std::vector<SearchHit>& hits,
                                       std::string_view query_text, const Embedder& embedder, std::size_t m) {
  if (m > hits.size()) throw InvalidArgumentError("rerank depth exceeds hit count");
  const Embedding q = embedder.embed(query_text);
  std::vector<SearchHit> out(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(m));
  for (auto& hit : out) {
    const StoredChunk* chunk = index.chunk(hit.ref);
    if (chunk == nullptr) throw NotFoundError("hit not in index: " + hit.ref.str());
    hit.bm25_score = hit.bm25_score.value_or(hit.score);
    hit.score = static_cast<double>(cosine_similarity(q, embedder.embed(chunk->text)));
  }
  std::sort(out.begin(), out.end(), [](const SearchHit& a, const SearchHit& b) {
    return a.score != b.score ? a.score > b.score : a.ref < b.ref;
  });
  return out;
}

}  // namespace docfoundry

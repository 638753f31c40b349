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


// Test helpers and reference implementations. The oracles here are written
// from the definitions, sharing no code with the library.

#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "docfoundry/ingest.hpp"
#include "docfoundry/query.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("docfoundry-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline docfoundry::Chunk make_chunk(std::string doc, std::uint32_t index, std::string text,
                                    docfoundry::Metadata md = {}) {
  docfoundry::Chunk c;
  c.doc_id = std::move(doc);
  c.chunk_index = index;
  c.text = std::move(text);
  c.metadata = std::move(md);
  return c;
}

/// Random sentence-like text over a small vocabulary.
inline std::string random_text(std::mt19937_64& rng, const std::vector<std::string>& vocab, std::size_t min_words,
                               std::size_t max_words) {
  std::uniform_int_distribution<std::size_t> len(min_words, max_words);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::string out;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += vocab[pick(rng)];
  }
  return out;
}

inline std::vector<std::string> small_vocab() {
  return {"cat", "dog", "Fish", "bird", "tree", "river", "stone", "cloud", "rain", "sun", "moon", "star"};
}

namespace oracle {

/// Lowercased maximal runs of [A-Za-z0-9] plus any byte >= 0x80.
inline std::vector<std::string> tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    const bool word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
    if (word) {
      cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct Doc {
  std::string id;  // display only
  std::vector<std::string> toks;
};

/// score(d) = sum_t IDF(t) * tf / (tf + k1 * (1 - b + b * dl / avgdl)).
inline double bm25(const std::vector<Doc>& corpus, std::size_t d, const std::vector<std::string>& terms,
                   double k1 = 1.2, double b = 0.75) {
  const double n = static_cast<double>(corpus.size());
  double total_len = 0;
  for (const auto& doc : corpus) total_len += static_cast<double>(doc.toks.size());
  const double avgdl = total_len / n;
  const double dl = static_cast<double>(corpus[d].toks.size());
  double score = 0;
  for (const auto& t : terms) {
    double df = 0;
    for (const auto& doc : corpus) df += std::count(doc.toks.begin(), doc.toks.end(), t) > 0 ? 1 : 0;
    const double tf = static_cast<double>(std::count(corpus[d].toks.begin(), corpus[d].toks.end(), t));
    if (tf == 0) continue;
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    score += idf * tf / (tf + k1 * (1.0 - b + b * dl / avgdl));
  }
  return score;
}

inline bool contains_sequence(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) return true;
  }
  return false;
}

/// Naive per-chunk predicate for a query tree.
inline bool matches(const docfoundry::QueryNode& q, const std::vector<std::string>& toks,
                    const docfoundry::Metadata& md) {
  using K = docfoundry::QueryNode::Kind;
  switch (q.kind) {
    case K::term: return contains_sequence(toks, tokens(q.text));
    case K::phrase: {
      std::vector<std::string> seq;
      for (const auto& w : q.words) {
        for (auto& t : tokens(w)) seq.push_back(t);
      }
      return contains_sequence(toks, seq);
    }
    case K::field: {
      const auto it = md.find(q.field);
      return it != md.end() && it->second == q.text;
    }
    case K::all_of:
      return std::all_of(q.children.begin(), q.children.end(), [&](const auto& c) { return matches(c, toks, md); });
    case K::any_of:
      return std::any_of(q.children.begin(), q.children.end(), [&](const auto& c) { return matches(c, toks, md); });
    case K::negate: return !matches(q.children.front(), toks, md);
  }
  return false;
}

/// Reciprocal rank fusion over ranked string ids; ties by id.
inline std::vector<std::pair<std::string, double>> rrf(const std::vector<std::vector<std::string>>& lists,
                                                       double k = 60) {
  std::map<std::string, double> score;
  for (const auto& list : lists) {
    for (std::size_t i = 0; i < list.size(); ++i) score[list[i]] += 1.0 / (k + static_cast<double>(i + 1));
  }
  std::vector<std::pair<std::string, double>> out(score.begin(), score.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

/// Hashed character n-gram vector: lowercase, collapse whitespace, trim, pad
/// with one space each side, FNV-1a 64 per n-gram (basis ^ seed), +1 per
/// bucket, L2-normalise.
inline std::vector<double> ngram_vector(const std::string& text, std::size_t dim = 256, std::size_t n = 3,
                                        std::uint64_t seed = 0) {
  std::string norm;
  bool space = false;
  for (unsigned char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      space = true;
      continue;
    }
    if (space && !norm.empty()) norm += ' ';
    space = false;
    norm += (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : static_cast<char>(c);
  }
  std::vector<double> v(dim, 0.0);
  if (norm.empty()) return v;
  const std::string padded = " " + norm + " ";
  std::map<std::string, int> counts;
  for (std::size_t i = 0; i + n <= padded.size(); ++i) ++counts[padded.substr(i, n)];
  for (const auto& [gram, count] : counts) {
    std::uint64_t h = 14695981039346656037ULL ^ seed;
    for (unsigned char c : gram) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    v[h % dim] += count;
  }
  double norm2 = 0;
  for (double x : v) norm2 += x * x;
  for (double& x : v) x /= std::sqrt(norm2);
  return v;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace oracle

/// Random query trees whose NOT nodes always sit under an AND with a positive
/// sibling.
class QueryGenerator {
 public:
  QueryGenerator(std::uint64_t seed, std::vector<std::string> vocab, std::vector<std::pair<std::string, std::string>> fields)
      : rng_(seed), vocab_(std::move(vocab)), fields_(std::move(fields)) {}

  docfoundry::QueryNode next(int depth = 3) {
    using docfoundry::QueryNode;
    std::uniform_int_distribution<int> choice(0, depth <= 0 ? 2 : 5);
    switch (choice(rng_)) {
      case 0:
      case 3: return QueryNode::term(word());
      case 1: return QueryNode::phrase({word(), word()});
      case 2: {
        const auto& f = fields_[std::uniform_int_distribution<std::size_t>(0, fields_.size() - 1)(rng_)];
        return QueryNode::field_filter(f.first, f.second);
      }
      case 4: {
        std::vector<QueryNode> kids;
        const int n = std::uniform_int_distribution<int>(2, 3)(rng_);
        for (int i = 0; i < n; ++i) kids.push_back(next(depth - 1));
        if (std::bernoulli_distribution(0.5)(rng_)) kids.push_back(QueryNode::negate(next(depth - 1)));
        return QueryNode::all_of(std::move(kids));
      }
      default: {
        std::vector<QueryNode> kids;
        const int n = std::uniform_int_distribution<int>(2, 3)(rng_);
        for (int i = 0; i < n; ++i) kids.push_back(next(depth - 1));
        return QueryNode::any_of(std::move(kids));
      }
    }
  }

 private:
  std::string word() { return vocab_[std::uniform_int_distribution<std::size_t>(0, vocab_.size() - 1)(rng_)]; }

  std::mt19937_64 rng_;
  std::vector<std::string> vocab_;
  std::vector<std::pair<std::string, std::string>> fields_;
};

}  // namespace testing

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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "docfoundry/types.hpp"
#include "docfoundry/vector_ops.hpp"

namespace docfoundry {

/// One k-NN result. `distance` is cosine distance in [0, 2].
struct NnHit {
  ChunkRef ref;
  double distance = 0.0;
  bool operator==(const NnHit&) const = default;
};

/// Sorts by distance ascending, ties by chunk ref.
inline void sort_hits(std::vector<NnHit>& hits) {
  std::sort(hits.begin(), hits.end(), [](const NnHit& a, const NnHit& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.ref < b.ref;
  });
}

struct HnswParams {
  std::size_t M = 16;                // max neighbours per node on layers >= 1
  std::size_t ef_construction = 200;
  std::size_t ef_search = 50;
  std::uint64_t seed = 42;           // level-draw RNG seed

  std::size_t max_neighbors(int level) const { return level == 0 ? 2 * M : M; }
  double level_multiplier() const { return 1.0 / std::log(static_cast<double>(M)); }
  bool operator==(const HnswParams&) const = default;
};

/// Exact scan over `items`; the reference semantics for HnswIndex::search.
template <typename Scalar>
std::vector<NnHit> brute_force_knn(const std::vector<std::pair<ChunkRef, Vector<Scalar>>>& items,
                                   const Vector<Scalar>& query, std::size_t k) {
  std::vector<NnHit> hits;
  hits.reserve(items.size());
  for (const auto& [ref, v] : items) {
    hits.push_back({ref, static_cast<double>(cosine_distance(v, query))});
  }
  sort_hits(hits);
  if (hits.size() > k) hits.resize(k);
  return hits;
}

/// Hierarchical navigable small-world graph over cosine distance.
///
/// Node levels are drawn as floor(-ln(u) * mL) with u uniform in (0, 1] from a
/// seeded generator, so a fixed seed and insertion order reproduce the graph.
/// Neighbour selection keeps the M nearest candidates (the simple heuristic);
/// select_neighbors() is the place to plug in the diversity heuristic.
template <typename Scalar = float>
class HnswIndex {
 public:
  using VectorType = Vector<Scalar>;
  static constexpr std::uint32_t kFileVersion = 1;
  static constexpr std::uint32_t kNoNode = std::numeric_limits<std::uint32_t>::max();

  explicit HnswIndex(std::size_t dim = 0, HnswParams params = {})
      : dim_(dim), params_(params), rng_(params.seed) {
    if (params_.M < 2) throw InvalidArgumentError("HNSW M must be at least 2");
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const HnswParams& params() const { return params_; }
  int max_level() const { return max_level_; }
  std::optional<std::uint32_t> entry_point() const {
    return entry_ == kNoNode ? std::nullopt : std::optional<std::uint32_t>(entry_);
  }

  int level_of(std::uint32_t node) const { return static_cast<int>(nodes_.at(node).links.size()) - 1; }
  const std::vector<std::uint32_t>& neighbors(std::uint32_t node, int level) const {
    return nodes_.at(node).links.at(static_cast<std::size_t>(level));
  }
  const ChunkRef& label(std::uint32_t node) const { return nodes_.at(node).label; }
  const VectorType& vector(std::uint32_t node) const { return nodes_.at(node).vec; }

  std::optional<std::uint32_t> find(const ChunkRef& ref) const {
    const auto it = by_label_.find(ref);
    return it == by_label_.end() ? std::nullopt : std::optional<std::uint32_t>(it->second);
  }

  void insert(const ChunkRef& ref, const VectorType& vec) {
    if (by_label_.contains(ref)) throw DuplicateError("HNSW id already present: " + ref.str());
    if (dim_ == 0 && nodes_.empty()) dim_ = static_cast<std::size_t>(vec.size());
    if (static_cast<std::size_t>(vec.size()) != dim_) {
      throw InvalidArgumentError("vector dimension " + std::to_string(vec.size()) + " != index dimension " +
                                 std::to_string(dim_));
    }
    const int level = draw_level();
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{ref, vec, vec.norm(), std::vector<std::vector<std::uint32_t>>(level + 1)});
    by_label_.emplace(ref, id);

    if (entry_ == kNoNode) {
      entry_ = id;
      max_level_ = level;
      return;
    }

    const Node& node = nodes_[id];
    std::uint32_t ep = entry_;
    for (int lc = max_level_; lc > level; --lc) ep = greedy_closest(node.vec, node.norm, ep, lc);

    std::vector<std::uint32_t> entry_points{ep};
    for (int lc = std::min(level, max_level_); lc >= 0; --lc) {
      auto candidates = search_layer(node.vec, node.norm, entry_points, params_.ef_construction, lc);
      auto chosen = select_neighbors(candidates, params_.M);
      nodes_[id].links[static_cast<std::size_t>(lc)] = chosen;
      for (const std::uint32_t nb : chosen) {
        auto& links = nodes_[nb].links[static_cast<std::size_t>(lc)];
        links.push_back(id);
        if (links.size() > params_.max_neighbors(lc)) shrink(nb, lc);
      }
      entry_points.clear();
      for (const auto& c : candidates) entry_points.push_back(c.second);
    }
    if (level > max_level_) {
      max_level_ = level;
      entry_ = id;
    }
  }

  /// k nearest found with an ef-bounded best-first search at layer 0.
  /// `ef` == 0 means params().ef_search; ef is raised to at least k.
  std::vector<NnHit> search(const VectorType& query, std::size_t k, std::size_t ef = 0) const {
    if (nodes_.empty()) throw EmptyIndexError("HNSW index is empty");
    if (k == 0) throw InvalidArgumentError("k must be at least 1");
    if (static_cast<std::size_t>(query.size()) != dim_) throw InvalidArgumentError("query dimension mismatch");
    ef = std::max(ef == 0 ? params_.ef_search : ef, k);
    const Scalar qnorm = query.norm();
    std::uint32_t ep = entry_;
    for (int lc = max_level_; lc > 0; --lc) ep = greedy_closest(query, qnorm, ep, lc);
    const auto found = search_layer(query, qnorm, {ep}, ef, 0);
    std::vector<NnHit> hits;
    hits.reserve(found.size());
    for (const auto& [d, n] : found) hits.push_back({nodes_[n].label, static_cast<double>(d)});
    sort_hits(hits);
    if (hits.size() > k) hits.resize(k);
    return hits;
  }

  /// All (label, vector) pairs in insertion order; feeds brute_force_knn.
  std::vector<std::pair<ChunkRef, VectorType>> items() const {
    std::vector<std::pair<ChunkRef, VectorType>> out;
    out.reserve(nodes_.size());
    for (const auto& n : nodes_) out.emplace_back(n.label, n.vec);
    return out;
  }

  /// Empty when the degree, live-edge and entry-point invariants hold;
  /// otherwise one message per violation.
  std::vector<std::string> check_invariants() const {
    std::vector<std::string> problems;
    const auto n = static_cast<std::uint32_t>(nodes_.size());
    int top = -1;
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto& node = nodes_[i];
      top = std::max(top, static_cast<int>(node.links.size()) - 1);
      for (std::size_t lc = 0; lc < node.links.size(); ++lc) {
        const auto& links = node.links[lc];
        if (links.size() > params_.max_neighbors(static_cast<int>(lc))) {
          problems.push_back("node " + std::to_string(i) + " exceeds degree bound at level " + std::to_string(lc));
        }
        for (const std::uint32_t nb : links) {
          if (nb >= n) {
            problems.push_back("node " + std::to_string(i) + " links to missing node " + std::to_string(nb));
          } else if (nodes_[nb].links.size() <= lc) {
            problems.push_back("node " + std::to_string(i) + " links to node " + std::to_string(nb) +
                               " absent from level " + std::to_string(lc));
          } else if (nb == i) {
            problems.push_back("node " + std::to_string(i) + " links to itself");
          }
        }
      }
    }
    if (n == 0) {
      if (entry_ != kNoNode) problems.push_back("empty index has an entry point");
    } else if (entry_ >= n) {
      problems.push_back("entry point missing");
    } else if (static_cast<int>(nodes_[entry_].links.size()) - 1 != top || top != max_level_) {
      problems.push_back("entry point is not at the maximum occupied level");
    }
    return problems;
  }

  /// Every node reachable from the entry point along layer-0 edges.
  bool layer0_connected() const {
    if (nodes_.empty()) return true;
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<std::uint32_t> stack{entry_};
    seen[entry_] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const auto cur = stack.back();
      stack.pop_back();
      for (const auto nb : nodes_[cur].links[0]) {
        if (!seen[nb]) {
          seen[nb] = 1;
          ++count;
          stack.push_back(nb);
        }
      }
    }
    return count == nodes_.size();
  }

  /// Structural equality: parameters, graph, vectors and labels (RNG state excluded).
  friend bool operator==(const HnswIndex& a, const HnswIndex& b) {
    if (a.dim_ != b.dim_ || a.params_ != b.params_ || a.entry_ != b.entry_ || a.max_level_ != b.max_level_ ||
        a.nodes_.size() != b.nodes_.size()) {
      return false;
    }
    for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
      const auto& x = a.nodes_[i];
      const auto& y = b.nodes_[i];
      if (x.label != y.label || x.links != y.links || x.vec != y.vec) return false;
    }
    return true;
  }

  // Binary container, all integers and scalars little-endian:
  //   "DFHNSW\0\0" u32 version u32 scalar_bytes u64 dim u64 M u64 ef_construction
  //   u64 ef_search u64 seed u64 node_count i32 max_level u32 entry
  //   per node: u32 id_len, id bytes, u32 chunk_index, i32 level, dim scalars,
  //             per level 0..level: u32 count, count x u32 neighbour
  void write(std::ostream& out) const {
    Writer w{out};
    out.write("DFHNSW\0\0", 8);
    w.u32(kFileVersion);
    w.u32(sizeof(Scalar));
    w.u64(dim_);
    w.u64(params_.M);
    w.u64(params_.ef_construction);
    w.u64(params_.ef_search);
    w.u64(params_.seed);
    w.u64(nodes_.size());
    w.u32(static_cast<std::uint32_t>(max_level_));
    w.u32(entry_);
    for (const auto& n : nodes_) {
      w.u32(static_cast<std::uint32_t>(n.label.doc_id.size()));
      out.write(n.label.doc_id.data(), static_cast<std::streamsize>(n.label.doc_id.size()));
      w.u32(n.label.chunk_index);
      w.u32(static_cast<std::uint32_t>(n.links.size() - 1));
      for (Eigen::Index i = 0; i < n.vec.size(); ++i) w.scalar(n.vec[i]);
      for (const auto& links : n.links) {
        w.u32(static_cast<std::uint32_t>(links.size()));
        for (const auto nb : links) w.u32(nb);
      }
    }
    if (!out) throw Error("io", "failed to write HNSW index");
  }

  /// Reads a container written by write(). Throws VersionMismatchError or
  /// CorruptFileError (with byte offset); never returns a partial index.
  static HnswIndex read(std::istream& in) {
    Reader r{in};
    char magic[8];
    r.bytes(magic, 8);
    if (std::memcmp(magic, "DFHNSW\0\0", 8) != 0) throw CorruptFileError("bad magic", 0);
    const std::uint32_t version = r.u32();
    if (version != kFileVersion) {
      throw VersionMismatchError("HNSW file version " + std::to_string(version) + ", expected " +
                                 std::to_string(kFileVersion));
    }
    if (r.u32() != sizeof(Scalar)) throw CorruptFileError("scalar width mismatch", r.offset - 4);
    const std::size_t dim = r.u64();
    HnswParams p;
    p.M = r.u64();
    p.ef_construction = r.u64();
    p.ef_search = r.u64();
    p.seed = r.u64();
    if (p.M < 2) throw CorruptFileError("invalid M", r.offset - 32);
    const std::uint64_t count = r.u64();
    HnswIndex index(dim, p);
    index.max_level_ = static_cast<int>(r.u32());
    index.entry_ = r.u32();
    for (std::uint64_t i = 0; i < count; ++i) {
      Node n;
      const std::uint32_t len = r.u32();
      if (len > (1u << 20)) throw CorruptFileError("implausible id length", r.offset - 4);
      n.label.doc_id.resize(len);
      r.bytes(n.label.doc_id.data(), len);
      n.label.chunk_index = r.u32();
      const std::uint32_t level = r.u32();
      if (level > 64) throw CorruptFileError("implausible node level", r.offset - 4);
      n.vec.resize(static_cast<Eigen::Index>(dim));
      for (std::size_t d = 0; d < dim; ++d) n.vec[static_cast<Eigen::Index>(d)] = r.template scalar<Scalar>();
      n.norm = n.vec.norm();
      n.links.resize(level + 1);
      for (auto& links : n.links) {
        const std::uint32_t c = r.u32();
        if (c > 4 * p.M + 1) throw CorruptFileError("implausible neighbour count", r.offset - 4);
        links.resize(c);
        for (auto& nb : links) {
          nb = r.u32();
          if (nb >= count) throw CorruptFileError("neighbour id out of range", r.offset - 4);
        }
      }
      index.by_label_.emplace(n.label, static_cast<std::uint32_t>(index.nodes_.size()));
      index.nodes_.push_back(std::move(n));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw CorruptFileError("trailing bytes", r.offset);
    if (count == 0 ? index.entry_ != kNoNode : index.entry_ >= count) {
      throw CorruptFileError("entry point out of range", 0);
    }
    index.rng_.seed(p.seed ^ count);
    return index;
  }

  void save(const std::filesystem::path& path) const {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("io", "cannot write " + tmp.string());
      write(out);
    }
    std::filesystem::rename(tmp, path);
  }

  static HnswIndex load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + path.string());
    return read(in);
  }

 private:
  struct Node {
    ChunkRef label;
    VectorType vec;
    Scalar norm = 0;
    std::vector<std::vector<std::uint32_t>> links;  // links[level]
  };

  using Candidate = std::pair<Scalar, std::uint32_t>;  // (distance, node)

  struct Writer {
    std::ostream& out;
    void u32(std::uint32_t v) {
      char b[4];
      for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
      out.write(b, 4);
    }
    void u64(std::uint64_t v) {
      char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
      out.write(b, 8);
    }
    void scalar(Scalar s) {
      if constexpr (sizeof(Scalar) == 4) {
        u32(std::bit_cast<std::uint32_t>(s));
      } else {
        u64(std::bit_cast<std::uint64_t>(s));
      }
    }
  };

  struct Reader {
    std::istream& in;
    std::size_t offset = 0;
    void bytes(char* dst, std::size_t n) {
      in.read(dst, static_cast<std::streamsize>(n));
      const auto got = static_cast<std::size_t>(in.gcount());
      if (got != n) throw CorruptFileError("unexpected end of file", offset + got);
      offset += n;
    }
    std::uint32_t u32() {
      unsigned char b[4];
      bytes(reinterpret_cast<char*>(b), 4);
      std::uint32_t v = 0;
      for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
      return v;
    }
    std::uint64_t u64() {
      unsigned char b[8];
      bytes(reinterpret_cast<char*>(b), 8);
      std::uint64_t v = 0;
      for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
      return v;
    }
    template <typename S>
    S scalar() {
      if constexpr (sizeof(S) == 4) {
        return std::bit_cast<S>(u32());
      } else {
        return std::bit_cast<S>(u64());
      }
    }
  };

  int draw_level() {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double u = 1.0 - uniform(rng_);  // (0, 1]
    const double level = std::floor(-std::log(u) * params_.level_multiplier());
    return static_cast<int>(std::min(level, 32.0));
  }

  Scalar distance_to(const VectorType& q, Scalar qnorm, std::uint32_t node) const {
    const Node& n = nodes_[node];
    if (qnorm == Scalar(0) || n.norm == Scalar(0)) return Scalar(1);
    const Scalar cos = std::clamp(q.dot(n.vec) / (qnorm * n.norm), Scalar(-1), Scalar(1));
    return Scalar(1) - cos;
  }

  std::uint32_t greedy_closest(const VectorType& q, Scalar qnorm, std::uint32_t ep, int level) const {
    Scalar best = distance_to(q, qnorm, ep);
    bool improved = true;
    while (improved) {
      improved = false;
      for (const auto nb : nodes_[ep].links[static_cast<std::size_t>(level)]) {
        const Scalar d = distance_to(q, qnorm, nb);
        if (d < best) {
          best = d;
          ep = nb;
          improved = true;
        }
      }
    }
    return ep;
  }

  // Best-first search bounded by `ef`; returns candidates sorted by distance.
  std::vector<Candidate> search_layer(const VectorType& q, Scalar qnorm, const std::vector<std::uint32_t>& entry_points,
                                      std::size_t ef, int level) const {
    std::vector<char> visited(nodes_.size(), 0);
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;
    std::priority_queue<Candidate> best;
    for (const auto ep : entry_points) {
      if (visited[ep]) continue;
      visited[ep] = 1;
      const Scalar d = distance_to(q, qnorm, ep);
      frontier.emplace(d, ep);
      best.emplace(d, ep);
      if (best.size() > ef) best.pop();
    }
    while (!frontier.empty()) {
      const auto [d, cur] = frontier.top();
      if (best.size() >= ef && d > best.top().first) break;
      frontier.pop();
      for (const auto nb : nodes_[cur].links[static_cast<std::size_t>(level)]) {
        if (visited[nb]) continue;
        visited[nb] = 1;
        const Scalar dn = distance_to(q, qnorm, nb);
        if (best.size() < ef || dn < best.top().first) {
          frontier.emplace(dn, nb);
          best.emplace(dn, nb);
          if (best.size() > ef) best.pop();
        }
      }
    }
    std::vector<Candidate> out;
    out.reserve(best.size());
    while (!best.empty()) {
      out.push_back(best.top());
      best.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  // Simple heuristic: the `m` nearest candidates (input is sorted ascending).
  std::vector<std::uint32_t> select_neighbors(const std::vector<Candidate>& sorted, std::size_t m) const {
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < sorted.size() && out.size() < m; ++i) out.push_back(sorted[i].second);
    return out;
  }

  void shrink(std::uint32_t node, int level) {
    auto& links = nodes_[node].links[static_cast<std::size_t>(level)];
    std::vector<Candidate> scored;
    scored.reserve(links.size());
    for (const auto nb : links) scored.emplace_back(distance_to(nodes_[nb].vec, nodes_[nb].norm, node), nb);
    std::sort(scored.begin(), scored.end());
    links = select_neighbors(scored, params_.max_neighbors(level));
  }

  std::size_t dim_;
  HnswParams params_;
  std::mt19937_64 rng_;
  std::vector<Node> nodes_;
  std::map<ChunkRef, std::uint32_t> by_label_;
  std::uint32_t entry_ = kNoNode;
  int max_level_ = -1;
};

}  // namespace docfoundry

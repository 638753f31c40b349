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


#include <doctest.h>

#include <random>

#include "docfoundry/embedder.hpp"
#include "docfoundry/sparse_index.hpp"
#include "support.hpp"

using namespace docfoundry;
using testing::make_chunk;

namespace {

std::vector<Chunk> seeded_corpus(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  const auto vocab = testing::small_vocab();
  const std::vector<std::string> langs = {"en", "fr"};
  std::vector<Chunk> out;
  for (std::size_t i = 0; i < n; ++i) {
    Metadata md{{"lang", langs[i % 2]}, {"year", std::to_string(2020 + i % 4)}};
    out.push_back(make_chunk("d" + std::to_string(i / 3), static_cast<std::uint32_t>(i % 3),
                             testing::random_text(rng, vocab, 3, 30), md));
  }
  return out;
}

}  // namespace

TEST_CASE("index statistics on small inputs") {
  const std::vector<Chunk> one = {make_chunk("a", 0, "cat dog cat")};
  const auto idx = index_chunks(one);
  CHECK(idx.df("cat") == 1);
  const auto* p = idx.postings("cat");
  REQUIRE(p != nullptr);
  REQUIRE(p->size() == 1);
  CHECK(p->front().tf == 2);
  CHECK(p->front().positions == std::vector<std::uint32_t>{0, 2});

  CHECK_THROWS_AS(index_chunks(std::vector<Chunk>{}), InvalidArgumentError);

  const std::vector<Chunk> two = {make_chunk("a", 0, "alpha beta"), make_chunk("b", 0, "gamma delta")};
  const auto idx2 = index_chunks(two);
  CHECK(idx2.size() == 2);
  for (const std::string t : {"alpha", "beta", "gamma", "delta"}) CHECK(idx2.df(t) == 1);
}

TEST_CASE("query grammar") {
  CHECK(parse_query("budget") == QueryNode::term("budget"));
  CHECK(parse_query("a OR b AND c") ==
        QueryNode::any_of({QueryNode::term("a"), QueryNode::all_of({QueryNode::term("b"), QueryNode::term("c")})}));
  CHECK(parse_query("year:2023 AND \"fiscal year\" NOT draft") ==
        QueryNode::all_of({QueryNode::field_filter("year", "2023"), QueryNode::phrase({"fiscal", "year"}),
                           QueryNode::negate(QueryNode::term("draft"))}));

  for (const std::string bad : {"a AND", "(a", "a)", "\"open", "", "OR b", "NOT a"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_query(bad), QuerySyntaxError);
  }
  try {
    parse_query("a AND");
    FAIL("expected a syntax error");
  } catch (const QuerySyntaxError& e) {
    CHECK(e.position() == 5);
  }
}

TEST_CASE("render then parse is a fixed point") {
  testing::QueryGenerator gen(11, testing::small_vocab(), {{"lang", "en"}, {"year", "2021"}});
  for (int i = 0; i < 300; ++i) {
    const auto ast = gen.next();
    const auto text = render_query(ast);
    CAPTURE(text);
    const auto reparsed = parse_query(text);
    CHECK(render_query(reparsed) == text);
    CHECK(parse_query(render_query(reparsed)) == reparsed);
  }
}

TEST_CASE("boolean evaluation agrees with a per-chunk scan") {
  const auto corpus = seeded_corpus(3, 50);
  const auto idx = index_chunks(corpus);
  testing::QueryGenerator gen(5, testing::small_vocab(), {{"lang", "en"}, {"year", "2021"}, {"year", "1999"}});
  for (int i = 0; i < 200; ++i) {
    const auto q = gen.next();
    CAPTURE(render_query(q));
    std::vector<ChunkRef> expected;
    for (const auto& c : corpus) {
      if (testing::oracle::matches(q, testing::oracle::tokens(c.text), c.metadata)) expected.push_back(c.ref());
    }
    std::sort(expected.begin(), expected.end());
    auto got = idx.evaluate(q);
    std::sort(got.begin(), got.end());
    CHECK(got == expected);
  }
}

TEST_CASE("BM25 scores and ranking match a brute-force implementation") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto corpus = seeded_corpus(seed * 101, 20 + 16 * seed);
    const auto idx = index_chunks(corpus);
    std::vector<testing::oracle::Doc> docs;
    for (const auto& c : corpus) docs.push_back({c.ref().str(), testing::oracle::tokens(c.text)});
    std::mt19937_64 rng(seed);
    for (int qi = 0; qi < 10; ++qi) {
      const auto query_text = testing::random_text(rng, testing::small_vocab(), 1, 3);
      const auto q = free_text_query(query_text);
      std::set<std::string> uniq;
      for (auto& t : testing::oracle::tokens(query_text)) uniq.insert(t);
      const std::vector<std::string> terms(uniq.begin(), uniq.end());

      std::vector<std::pair<double, std::string>> expected;
      for (std::size_t d = 0; d < docs.size(); ++d) {
        bool any = false;
        for (const auto& t : terms) any |= std::count(docs[d].toks.begin(), docs[d].toks.end(), t) > 0;
        if (any) expected.emplace_back(testing::oracle::bm25(docs, d, terms), docs[d].id);
      }
      const auto page = search(idx, q, corpus.size());
      REQUIRE(page.total == expected.size());
      std::map<std::string, double> exp_by_ref;
      for (const auto& [s, id] : expected) exp_by_ref[id] = s;
      for (std::size_t i = 0; i < page.hits.size(); ++i) {
        const auto& h = page.hits[i];
        CHECK(std::abs(h.score - exp_by_ref.at(h.ref.str())) <= 1e-9);
        if (i > 0) CHECK(page.hits[i - 1].score >= h.score - 1e-12);
      }
    }
  }
}

TEST_CASE("search results, pagination and highlights") {
  const std::vector<Chunk> docs = {make_chunk("a", 0, "budget report for the year"),
                                   make_chunk("b", 0, "holiday photos")};
  const auto idx = index_chunks(docs);
  CHECK(search(idx, parse_query("zebra"), 10).total == 0);
  const auto page = search(idx, parse_query("budget"), 10);
  REQUIRE(page.total == 1);
  CHECK(page.hits[0].ref.doc_id == "a");
  CHECK(page.hits[0].matched_terms == std::vector<std::string>{"budget"});

  std::vector<Chunk> many;
  for (int i = 0; i < 7; ++i) many.push_back(make_chunk("m" + std::to_string(i), 0, "shared word " + std::to_string(i)));
  const auto midx = index_chunks(many);
  std::set<ChunkRef> seen;
  for (std::size_t p = 0; p < 3; ++p) {
    const auto pg = search(midx, parse_query("shared"), 3, p);
    CHECK(pg.total == 7);
    CHECK(pg.hits.size() == (p < 2 ? 3u : 1u));
    for (const auto& h : pg.hits) CHECK(seen.insert(h.ref).second);
  }
  CHECK(search(midx, parse_query("shared"), 3, 9).hits.empty());
  CHECK(search(midx, parse_query("shared"), 3, 9).total == 7);

  CHECK(highlight("cat dog cat", {"cat"}) == std::vector<Span>{{0, 3}, {8, 11}});
  CHECK(highlight("cat dog cat", {}).empty());
  const std::string mixed = "The Cat sat";
  const auto spans = highlight(mixed, {"cat"});
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == Span{mixed.find("Cat"), mixed.find("Cat") + 3});
}

TEST_CASE("phrases require adjacency") {
  const std::vector<Chunk> docs = {make_chunk("a", 0, "fiscal year report"), make_chunk("b", 0, "year fiscal report"),
                                   make_chunk("c", 0, "fiscal planning year")};
  const auto idx = index_chunks(docs);
  const auto hits = idx.evaluate(parse_query("\"fiscal year\""));
  CHECK(hits == std::vector<ChunkRef>{{"a", 0}});
  CHECK(idx.evaluate(parse_query("fiscal AND NOT \"fiscal year\"")) == std::vector<ChunkRef>{{"b", 0}, {"c", 0}});
}

TEST_CASE("delete and re-index restores the index exactly") {
  const auto corpus = seeded_corpus(9, 12);
  const auto full = index_chunks(corpus);
  auto reduced = delete_document(full, "d1");
  CHECK(!reduced.contains_document("d1"));
  CHECK(reduced.size() == full.size() - 3);
  for (const auto& ref : reduced.evaluate(parse_query(testing::small_vocab()[0]))) CHECK(ref.doc_id != "d1");

  std::vector<Chunk> d1;
  for (const auto& c : corpus) {
    if (c.doc_id == "d1") d1.push_back(c);
  }
  reduced.add(d1);
  CHECK(reduced == full);
  CHECK_THROWS_AS(delete_document(full, "nope"), NotFoundError);

  const std::vector<Chunk> two = {make_chunk("x", 0, "apple pie"), make_chunk("y", 0, "apple tart")};
  const auto after = delete_document(index_chunks(two), "x");
  CHECK(after.size() == 1);
  CHECK(after.evaluate(parse_query("apple")) == std::vector<ChunkRef>{{"y", 0}});
}

TEST_CASE("index persists losslessly") {
  testing::TempDir dir;
  const auto idx = index_chunks(seeded_corpus(4, 30));
  idx.save(dir / "sparse.json");
  CHECK(InvertedIndex::load(dir / "sparse.json") == idx);
}

TEST_CASE("semantic re-ranking orders by exact cosine") {
  const std::vector<Chunk> docs = {make_chunk("a", 0, "solar panel output data"),
                                   make_chunk("b", 0, "solar eclipse viewing guide"),
                                   make_chunk("c", 0, "solar power for homes")};
  const auto idx = index_chunks(docs);
  HashedNgramEmbedder emb;
  const auto hits = search(idx, parse_query("solar"), 10).hits;
  const std::string query = "solar power homes";
  const auto reranked = rerank_semantic(idx, hits, query, emb, 3);
  REQUIRE(reranked.size() == 3);
  std::vector<std::pair<double, std::string>> expected;
  const auto qv = testing::oracle::ngram_vector(query);
  for (const auto& c : docs) expected.emplace_back(-testing::oracle::dot(qv, testing::oracle::ngram_vector(c.text)), c.doc_id);
  std::sort(expected.begin(), expected.end());
  for (std::size_t i = 0; i < 3; ++i) CHECK(reranked[i].ref.doc_id == expected[i].second);
  for (const auto& h : reranked) CHECK(h.bm25_score.has_value());

  const auto exact = rerank_semantic(idx, hits, docs[1].text, emb, 3);
  CHECK(exact.front().ref.doc_id == "b");
  CHECK(exact.front().score == doctest::Approx(1.0).epsilon(1e-6));

  const auto single = rerank_semantic(idx, hits, query, emb, 1);
  REQUIRE(single.size() == 1);
  CHECK(single[0].ref == hits[0].ref);
}

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

#include "docfoundry/ingest.hpp"
#include "support.hpp"

using namespace docfoundry;
using testing::TempDir;
using testing::write_file;

namespace {

std::string words(std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += "w" + std::to_string(i);
  }
  return out;
}

DocumentRecord doc_of(const std::string& text) { return make_document("doc.txt", text, {}, "2026-01-01T00:00:00Z"); }

}  // namespace

TEST_CASE("content hash matches published SHA-256 digests") {
  CHECK(content_hash("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(content_hash("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(content_hash("abc") == content_hash("abc"));
  CHECK(content_hash("abc") != content_hash("abd"));
}

TEST_CASE("load_directory picks up files, globs and nested paths") {
  TempDir dir;
  write_file(dir / "a.txt", "hello world");
  write_file(dir / "b.bin", "\x01\x02");
  write_file(dir / "sub/c.md", "# Title\n\nnested body");

  SUBCASE("single text file") {
    TempDir one;
    write_file(one / "a.txt", "hello world");
    const auto r = load_directory(one.path());
    REQUIRE(r.documents.size() == 1);
    CHECK(r.documents[0].text == "hello world");
    CHECK(r.documents[0].source_path == "a.txt");
  }
  SUBCASE("glob filter") {
    const auto r = load_directory(dir.path(), {"*.txt"});
    REQUIRE(r.documents.size() == 1);
    CHECK(r.documents[0].source_path == "a.txt");
  }
  SUBCASE("nested path is relative and slash separated") {
    const auto r = load_directory(dir.path());
    std::vector<std::string> paths;
    for (const auto& d : r.documents) paths.push_back(d.source_path);
    // Oracle: walk the tree ourselves.
    std::vector<std::string> expected;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path())) {
      if (!e.is_regular_file()) continue;
      const auto rel = std::filesystem::relative(e.path(), dir.path()).generic_string();
      const auto ext = e.path().extension().string();
      if (ext == ".txt" || ext == ".md") expected.push_back(rel);
    }
    std::sort(expected.begin(), expected.end());
    CHECK(paths == expected);
    CHECK(std::find(paths.begin(), paths.end(), "sub/c.md") != paths.end());
  }
  SUBCASE("missing directory") { CHECK_THROWS_AS(load_directory(dir / "nope"), NotFoundError); }
}

TEST_CASE("sidecar metadata is attached and propagated to chunks") {
  TempDir dir;
  write_file(dir / "r.txt", "report body text");
  write_file(dir / "r.txt.meta.json", R"({"year":"2023","draft":false})");
  const auto r = load_directory(dir.path());
  REQUIRE(r.documents.size() == 1);
  const auto& d = r.documents[0];
  CHECK(d.metadata.at("year") == "2023");
  CHECK(d.metadata.at("draft") == "false");
  const auto chunks = chunk_document(d, {});
  REQUIRE(chunks.size() == 1);
  CHECK(chunks[0].metadata.at("year") == "2023");
  CHECK(chunks[0].metadata.at("source_path") == "r.txt");
}

TEST_CASE("document ids are stable for identical path and content") {
  const auto a = make_document("x.txt", "same", {}, "2026-01-01T00:00:00Z");
  const auto b = make_document("x.txt", "same", {}, "2027-01-01T00:00:00Z");
  const auto c = make_document("y.txt", "same", {}, "2026-01-01T00:00:00Z");
  CHECK(a.doc_id == b.doc_id);
  CHECK(a.doc_id != c.doc_id);
  CHECK_THROWS_AS(make_document("e.txt", "  \n\t", {}), InvalidArgumentError);
}

TEST_CASE("chunk windows follow the size and overlap") {
  const ChunkingConfig cfg{300, 50};
  auto bounds = [&](std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& c : chunk_document(doc_of(words(n)), cfg)) out.emplace_back(c.start_word, c.end_word);
    return out;
  };
  CHECK(bounds(100) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 100}});
  CHECK(bounds(300) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 300}});
  CHECK(bounds(650) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 300}, {250, 550}, {500, 650}});

  CHECK_THROWS_AS(chunk_document(doc_of("a b"), ChunkingConfig{10, 10}), InvalidArgumentError);
  CHECK_THROWS_AS(chunk_document(doc_of("a b"), ChunkingConfig{0, 0}), InvalidArgumentError);
}

TEST_CASE("chunks cover every word and their text is a verbatim slice") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t size = std::uniform_int_distribution<std::size_t>(2, 40)(rng);
    const std::size_t overlap = std::uniform_int_distribution<std::size_t>(0, size - 1)(rng);
    const auto text = testing::random_text(rng, testing::small_vocab(), 1, 200);
    const auto doc = doc_of(text);
    const auto chunks = chunk_document(doc, {size, overlap});
    const auto nwords = word_spans(doc.text).size();
    std::vector<int> covered(nwords, 0);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const auto& c = chunks[i];
      CHECK(c.chunk_index == i);
      CHECK(c.end_word - c.start_word <= size);
      CHECK(doc.text.substr(c.start_char, c.end_char - c.start_char) == c.text);
      for (std::size_t w = c.start_word; w < c.end_word; ++w) covered[w] = 1;
      if (i > 0) CHECK(c.start_word == chunks[i - 1].start_word + (size - overlap));
    }
    CHECK(std::all_of(covered.begin(), covered.end(), [](int v) { return v == 1; }));
  }
}

TEST_CASE("segment_units splits sentences and paragraphs") {
  const std::string s = "A cat. A dog.";
  const auto spans = segment_units(s, UnitKind::sentence);
  REQUIRE(spans.size() == 2);
  CHECK(s.substr(spans[0].start, spans[0].end - spans[0].start) == "A cat.");
  CHECK(s.substr(spans[1].start, spans[1].end - spans[1].start) == "A dog.");

  CHECK(segment_units("one\n\ntwo", UnitKind::paragraph).size() == 2);
  CHECK(segment_units("", UnitKind::sentence).empty());
  CHECK(segment_units("", UnitKind::paragraph).empty());
  CHECK(segment_units("He was going 35 mph.", UnitKind::sentence).size() == 1);
}

TEST_CASE("html and markdown are normalised to plain text") {
  const auto html = normalize_text("<html><script>x()</script><p>Hello &amp; bye</p></html>", ".html");
  CHECK(html.find("script") == std::string::npos);
  CHECK(html.find("x()") == std::string::npos);
  CHECK(html.find("Hello & bye") != std::string::npos);
}

TEST_CASE("document and chunk records round-trip through JSONL") {
  TempDir dir;
  std::vector<DocumentRecord> docs = {make_document("a.txt", "alpha beta", {{"k", "v"}}, "2026-01-01T00:00:00Z"),
                                      make_document("b.txt", "gamma \"quoted\"\nline", {}, "2026-01-01T00:00:00Z")};
  write_documents_jsonl(dir / "docs.jsonl", docs);
  CHECK(read_documents_jsonl(dir / "docs.jsonl") == docs);

  std::vector<Chunk> chunks;
  for (const auto& d : docs) {
    for (auto& c : chunk_document(d, {})) chunks.push_back(c);
  }
  write_chunks_jsonl(dir / "chunks.jsonl", chunks);
  CHECK(read_chunks_jsonl(dir / "chunks.jsonl") == chunks);
}

TEST_CASE("re-ingesting an unchanged directory is deterministic") {
  TempDir dir;
  write_file(dir / "a.txt", words(400));
  write_file(dir / "b.md", "# B\n\nsome markdown text");
  auto strip = [](LoadResult r) {
    for (auto& d : r.documents) d.ingested_at.clear();
    return r.documents;
  };
  const auto first = strip(load_directory(dir.path()));
  const auto second = strip(load_directory(dir.path()));
  CHECK(first == second);
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(chunk_document(first[i], {}) == chunk_document(second[i], {}));
  }
}

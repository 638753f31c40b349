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

#include "docfoundry/csv.hpp"
#include "docfoundry/pipelines.hpp"
#include "http_stub.hpp"
#include "support.hpp"

using namespace docfoundry;
using nlohmann::json;
using testing::make_chunk;

namespace {

std::vector<Chunk> four_chunks() {
  return {make_chunk("doc", 0, "Revenue grew in the first quarter because of strong exports."),
          make_chunk("doc", 1, "Operating costs fell as the company closed two warehouses."),
          make_chunk("doc", 2, "The board approved a new dividend policy for shareholders."),
          make_chunk("doc", 3, "Hiring will resume in the autumn after the budget review.")};
}

RecordSchema statute_schema() { return {"Statute", {{"statute_ref", FieldType::string, "cited statute", true}}}; }

RecordSchema quantity_schema() {
  return {"MeasuredQuantity",
          {{"value", FieldType::string, "numerical value", true},
           {"unit", FieldType::string, "unit of measurement", true}}};
}

std::shared_ptr<DualStore> disjoint_store() {
  auto store = std::make_shared<DualStore>(StoreKind::dual, std::make_shared<HashedNgramEmbedder>());
  store->ingest(std::vector<Chunk>{make_chunk("a", 0, "Volcanoes erupt molten basalt near tectonic ridges."),
                                   make_chunk("b", 0, "Penguins huddle together during antarctic winters."),
                                   make_chunk("c", 0, "Sourdough bread rises slowly with wild yeast.")});
  return store;
}

}  // namespace

TEST_CASE("map-reduce call accounting") {
  SUBCASE("single chunk is summarized directly") {
    ScriptedBackend b({{"", {"short"}, true}});
    const std::vector<Chunk> one = {make_chunk("d", 0, "A single short passage.")};
    const auto r = summarize_map_reduce(b, one, {});
    CHECK(r.direct_call_count == 1);
    CHECK(r.map_call_count == 0);
    CHECK(r.reduce_call_count == 0);
    CHECK(b.log().size() == 1);
    CHECK(r.summary == "short");
  }
  SUBCASE("four chunks give four maps and one reduce") {
    ScriptedBackend b({{"Combine the following", {"final summary"}, false}, {"", {"partial"}, true}});
    const auto chunks = four_chunks();
    const auto r = summarize_map_reduce(b, chunks, {});
    CHECK(r.map_call_count == 4);
    CHECK(r.reduce_call_count == 1);
    CHECK(r.direct_call_count == 0);
    CHECK(b.log().size() == 5);
    CHECK(r.total_calls() == b.log().size());
    CHECK(r.summary == "final summary");
    CHECK(r.chunk_refs.size() == 4);
    const auto entries = b.log().entries();
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(entries[i].request.get<std::string>().find(chunks[i].text) != std::string::npos);
    }
  }
  SUBCASE("whitespace chunks are skipped and reported") {
    ScriptedBackend b({{"", {"s"}, true}});
    auto chunks = four_chunks();
    chunks[1].text = "   \n ";
    const auto r = summarize_map_reduce(b, chunks, {});
    CHECK(r.skipped_chunks == std::vector<ChunkRef>{{"doc", 1}});
    CHECK(r.map_call_count == 3);
    CHECK(r.total_calls() == b.log().size());
  }
  SUBCASE("long partial summaries are reduced in several rounds") {
    std::string long_partial;
    for (int i = 0; i < 100; ++i) long_partial += "word ";
    ScriptedBackend b({{"Combine the following", {"merged"}, true}, {"", {long_partial}, true}});
    SummarizeOptions opts;
    opts.window_words = 300;
    const auto r = summarize_map_reduce(b, four_chunks(), opts);
    CHECK(r.map_call_count == 4);
    CHECK(r.reduce_call_count == 2);  // one group of three, then the final merge
    CHECK(r.total_calls() == b.log().size());
  }
}

TEST_CASE("concept filtering") {
  HashedNgramEmbedder emb;
  const auto chunks = four_chunks();
  SUBCASE("zero threshold reproduces plain map-reduce call for call") {
    ScriptedBackend plain({{"Combine the following", {"final"}, false}, {"", {"partial"}, true}});
    ScriptedBackend focused({{"Combine the following", {"final"}, false}, {"", {"partial"}, true}});
    const auto a = summarize_map_reduce(plain, chunks, {});
    const auto b = summarize_concept(focused, emb, chunks, "dividend", 0.0);
    CHECK(a.map_call_count == b.map_call_count);
    CHECK(a.reduce_call_count == b.reduce_call_count);
    CHECK(a.chunk_refs == b.chunk_refs);
    const auto la = plain.log().entries();
    const auto lb = focused.log().entries();
    REQUIRE(la.size() == lb.size());
    for (std::size_t i = 0; i < la.size(); ++i) CHECK(la[i].operation == lb[i].operation);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(lb[i].request.get<std::string>().find(chunks[i].text) != std::string::npos);
    }
  }
  SUBCASE("self-similar concept selects its chunk") {
    const auto sel = select_concept_chunks(emb, chunks, chunks[2].text, 0.999);
    REQUIRE(sel.size() == 1);
    CHECK(sel[0].ref() == chunks[2].ref());
  }
  SUBCASE("unsatisfiable threshold makes no calls") {
    ScriptedBackend b;
    const auto r = summarize_concept(b, emb, chunks, "anything", 1.1);
    CHECK(r.no_relevant_content);
    CHECK(r.total_calls() == 0);
    CHECK(b.log().size() == 0);
  }
}

TEST_CASE("extraction over units") {
  const auto doc = make_document("memo.txt", "Alpha measured 5 kg. Beta measured 7 m.", {}, "2026-01-01T00:00:00Z");
  SUBCASE("one row per sentence, in order") {
    ScriptedBackend b({{"Alpha", {R"({"value":"5","unit":"kg"})"}, false}, {"Beta", {R"({"value":"7","unit":"m"})"}, false}});
    const auto rows = extract_over_units(b, doc, UnitKind::sentence, "Extract from: {unit_text}", quantity_schema(), false);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].ok());
    CHECK((*rows[0].record)["unit"] == "kg");
    CHECK((*rows[1].record)["value"] == "7");
    CHECK(rows[0].unit_text == "Alpha measured 5 kg.");
    CHECK(b.log().size() == 2);
  }
  SUBCASE("a failing unit does not affect the others") {
    ScriptedBackend b({{"Alpha", {R"({"value":"5","unit":"kg"})"}, false}, {"Beta", {"{}"}, true}});
    const auto rows = extract_over_units(b, doc, UnitKind::sentence, "{unit_text}", quantity_schema(), true, 3);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].ok());
    CHECK(!rows[1].ok());
    REQUIRE(rows[1].report.has_value());
    CHECK(!rows[1].report->ok);
    CHECK(rows[1].attempts_used == 3);
    CHECK(b.log().size() == 1 + 3);
  }
  SUBCASE("statute citation") {
    const auto legal = make_document(
        "contract.txt", "The contract was awarded pursuant to 10 U.S.C. 2304 after review.", {}, "2026-01-01T00:00:00Z");
    ScriptedBackend b({{"pursuant to", {R"(Here you go: {"statute_ref": "10 U.S.C. 2304"})"}, false}});
    const auto rows = extract_over_units(b, legal, UnitKind::passage, "Find the statute in: {unit_text}", statute_schema(), false);
    REQUIRE(rows.size() == 1);
    CHECK((*rows[0].record)["statute_ref"] == "10 U.S.C. 2304");
  }
  SUBCASE("template must reference the unit") {
    ScriptedBackend b;
    CHECK_THROWS_AS(extract_over_units(b, doc, UnitKind::sentence, "no placeholder", quantity_schema(), false),
                    InvalidArgumentError);
  }
  SUBCASE("transport failures abort") {
    std::string url;
    { testing::StubServer s; url = s.url(); }
    BackendConfig cfg;
    cfg.kind = BackendKind::openai_compatible;
    cfg.base_url = url;
    cfg.timeout_s = 2;
    HttpBackend b(cfg);
    CHECK_THROWS_AS(extract_over_units(b, doc, UnitKind::sentence, "{unit_text}", quantity_schema(), false), BackendError);
  }
}

TEST_CASE("CSV export") {
  const auto schema = quantity_schema();
  CHECK(export_rows_csv({}, schema) == "doc_id,unit_index,unit_text,value,unit,attempts_used,error\r\n");

  std::vector<ExtractionRow> rows(2);
  rows[0].doc_id = "d";
  rows[0].unit_index = 0;
  rows[0].unit_text = "He said \"hi\", then left";
  rows[0].record = json{{"value", "1,5"}, {"unit", "kg"}};
  rows[0].attempts_used = 1;
  rows[1].doc_id = "d";
  rows[1].unit_index = 1;
  rows[1].unit_text = "line\nbreak";
  rows[1].attempts_used = 2;
  rows[1].error = "exhausted";
  const auto text = export_rows_csv(rows, schema);
  CHECK(text.find("\"1,5\"") != std::string::npos);
  const auto parsed = csv::parse(text);
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[1][2] == rows[0].unit_text);
  CHECK(parsed[1][3] == "1,5");
  CHECK(parsed[2][2] == "line\nbreak");
  CHECK(parsed[2][6] == "exhausted");
  CHECK(parsed[2][3].empty());
}

TEST_CASE("few-shot centroids") {
  HashedNgramEmbedder emb;
  SUBCASE("one example per label") {
    const std::vector<LabeledText> ex = {{"apples and pears", "fruit"}, {"hammers and nails", "tools"}};
    const auto m = fewshot_train(emb, ex);
    const Eigen::VectorXd e = emb.embed("apples and pears").cast<double>();
    CHECK((m.centroids.at("fruit") - e).norm() < 1e-9);
    CHECK(fewshot_predict(m, emb, "apples and pears").label == "fruit");
  }
  SUBCASE("duplicates leave the centroid unchanged") {
    const std::vector<LabeledText> once = {{"apples", "fruit"}, {"pears", "fruit"}, {"nails", "tools"}};
    const std::vector<LabeledText> twice = {{"apples", "fruit"}, {"apples", "fruit"}, {"pears", "fruit"},
                                            {"pears", "fruit"}, {"nails", "tools"}};
    CHECK((fewshot_train(emb, once).centroids.at("fruit") - fewshot_train(emb, twice).centroids.at("fruit")).norm() < 1e-9);
  }
  SUBCASE("three labels against an external mean-and-normalize") {
    std::vector<LabeledText> ex;
    const std::vector<std::string> labels = {"birds", "fish", "trees"};
    const std::vector<std::vector<std::string>> words = {{"sparrow", "robin", "eagle", "heron", "finch"},
                                                         {"salmon", "trout", "cod", "perch", "carp"},
                                                         {"oak", "birch", "maple", "cedar", "willow"}};
    for (std::size_t l = 0; l < 3; ++l) {
      for (const auto& w : words[l]) ex.push_back({"the " + w + " here", labels[l]});
    }
    const auto m = fewshot_train(emb, ex);
    for (std::size_t l = 0; l < 3; ++l) {
      std::vector<double> mean(256, 0.0);
      for (const auto& w : words[l]) {
        const auto v = testing::oracle::ngram_vector("the " + w + " here");
        for (std::size_t i = 0; i < 256; ++i) mean[i] += v[i] / 5.0;
      }
      double n = 0;
      for (double x : mean) n += x * x;
      n = std::sqrt(n);
      const auto& c = m.centroids.at(labels[l]);
      for (std::size_t i = 0; i < 256; ++i) CHECK(std::abs(c[static_cast<Eigen::Index>(i)] - mean[i] / n) < 1e-6);
      CHECK(m.example_counts.at(labels[l]) == 5);
    }
  }
  SUBCASE("zero vector ties go to the smallest label") {
    const std::vector<LabeledText> ex = {{"zebra", "zoo"}, {"apple", "alpha"}, {"mango", "middle"}};
    const auto m = fewshot_train(emb, ex);
    const auto p = fewshot_predict(m, emb, "   ");
    CHECK(p.label == "alpha");
    CHECK(p.score == 0.0);
  }
  SUBCASE("input checks and CSV examples") {
    CHECK_THROWS_AS(fewshot_train(emb, std::vector<LabeledText>{{"a", "x"}}), InvalidArgumentError);
    const auto ex = read_examples_csv("text,label\r\n\"hello, world\",greet\r\nbye,leave\r\n");
    REQUIRE(ex.size() == 2);
    CHECK(ex[0].text == "hello, world");
    CHECK(ex[1].label == "leave");
  }
}

TEST_CASE("ask retrieves sources and cites them") {
  auto store = disjoint_store();
  SUBCASE("lexically identical question ranks its chunk first") {
    ScriptedBackend b({{"", {"Penguins huddle together [1]."}, true}});
    const auto a = ask(b, *store, "Penguins huddle together during antarctic winters.", 2, SearchMode::sparse);
    REQUIRE(!a.sources.empty());
    CHECK(a.sources[0].ref.doc_id == "b");
    CHECK(a.sources.size() <= 2);
    const auto prompt = b.log().entries()[0].request.get<std::string>();
    CHECK(prompt.find("[1] Penguins huddle") != std::string::npos);
    CHECK(b.log().size() == 1);
  }
  SUBCASE("k larger than the corpus returns what exists") {
    EchoBackend b;
    const auto a = ask(b, *store, "volcanoes penguins sourdough", 10, SearchMode::hybrid);
    CHECK(a.sources.size() == 3);
    for (const auto& s : a.sources) CHECK(store->chunk(s.ref)->text.find(s.snippet) != std::string::npos);
  }
  SUBCASE("empty store") {
    DualStore empty(StoreKind::dual, std::make_shared<HashedNgramEmbedder>());
    EchoBackend b;
    CHECK_THROWS_AS(ask(b, empty, "anything", 4), EmptyStoreError);
  }
}

TEST_CASE("grounding verdicts") {
  auto store = disjoint_store();
  AnswerWithSources a;
  a.question = "q";
  a.sources = {{{"a", 0}, 1.0, "Volcanoes erupt"}, {{"b", 0}, 0.5, "Penguins huddle"}};
  SUBCASE("verbatim answers are supported") {
    a.answer = "Volcanoes erupt molten basalt near tectonic ridges [1]. Penguins huddle together during antarctic winters [2].";
    const auto g = verify_grounding(a, *store);
    CHECK(g.snippets_verbatim);
    CHECK(g.sentences.size() == 2);
    CHECK(g.all_supported());
  }
  SUBCASE("out-of-vocabulary sentences are flagged") {
    a.answer = "Volcanoes erupt molten basalt. Quantum chromodynamics explains gluon confinement.";
    const auto g = verify_grounding(a, *store);
    REQUIRE(g.sentences.size() == 2);
    CHECK(g.sentences[0].supported);
    CHECK(!g.sentences[1].supported);
    CHECK(g.sentences[1].overlap == 0.0);
    CHECK(g.unsupported == std::vector<std::string>{"Quantum chromodynamics explains gluon confinement."});
  }
  SUBCASE("mixed sentences match hand-computed overlaps") {
    // Content words: {penguins, huddle, near, volcanoes} -> best source a has {volcanoes, near} = 2/4,
    // source b has {penguins, huddle} = 2/4. {basalt, ridges, glaciers} -> a: 2/3.
    a.answer = "Penguins huddle near volcanoes. Basalt ridges and glaciers.";
    const auto g = verify_grounding(a, *store);
    REQUIRE(g.sentences.size() == 2);
    CHECK(g.sentences[0].overlap == doctest::Approx(0.5));
    CHECK(g.sentences[0].supported);
    CHECK(g.sentences[1].overlap == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("altered snippets are reported") {
    a.sources[0].snippet = "Volcanoes sleep";
    a.answer = "Volcanoes erupt.";
    const auto g = verify_grounding(a, *store);
    CHECK(!g.snippets_verbatim);
    CHECK(g.non_verbatim_snippets == std::vector<ChunkRef>{{"a", 0}});
  }
  CHECK(content_overlap({}, {"x"}) == 1.0);
  CHECK(content_words("The Cat and the hat") == std::set<std::string>{"cat", "hat"});
}

TEST_CASE("chat turns and context fitting") {
  SUBCASE("first turn sends only the user message") {
    ScriptedBackend b({{"", {"hello"}, true}});
    ChatSession s{"s1", {}, "t", std::nullopt};
    const auto t = chat_turn(b, s, "hi there", 8000);
    CHECK(t.transmitted.size() == 1);
    CHECK(t.transmitted[0].content == "hi there");
    CHECK(s.history.size() == 2);
  }
  SUBCASE("system prompt is prepended") {
    EchoBackend b;
    ChatSession s{"s1", {}, "t", std::string("Be brief.")};
    const auto t = chat_turn(b, s, "hi", 8000);
    REQUIRE(t.transmitted.size() == 2);
    CHECK(t.transmitted[0].role == ChatMessage::Role::system);
  }
  SUBCASE("tight budget keeps only the newest message") {
    EchoBackend b;
    ChatSession s{"s1", {}, "t", std::nullopt};
    chat_turn(b, s, std::string(50, 'a'), 8000);
    const auto t = chat_turn(b, s, std::string(50, 'b'), 60);
    REQUIRE(t.transmitted.size() == 1);
    CHECK(t.transmitted[0].content == std::string(50, 'b'));
  }
  SUBCASE("five echo turns give ten messages") {
    EchoBackend b;
    ChatSession s{"s1", {}, "t", std::nullopt};
    for (int i = 0; i < 5; ++i) {
      const auto reply = chat_turn(b, s, "turn " + std::to_string(i), 8000).reply;
      CHECK(reply.ends_with("turn " + std::to_string(i)));
    }
    CHECK(s.history.size() == 10);
    CHECK(b.log().size() == 5);
    validate_conversation(s.history);
  }
  SUBCASE("failures leave the session untouched") {
    ScriptedBackend b;
    ChatSession s{"s1", {}, "t", std::nullopt};
    CHECK_THROWS_AS(chat_turn(b, s, "hi", 8000), BackendError);
    CHECK(s.history.empty());
  }
  SUBCASE("fit_context starts at a user message") {
    using R = ChatMessage::Role;
    const std::vector<ChatMessage> m = {{R::user, "aaaa"}, {R::assistant, "bbbb"}, {R::user, "cc"}};
    const auto fitted = fit_context(m, 6);
    REQUIRE(fitted.size() == 1);
    CHECK(fitted[0].content == "cc");
    CHECK(fit_context(m, 100).size() == 3);
  }
}

TEST_CASE("pipelines run unchanged against an HTTP backend") {
  testing::StubServer stub;
  stub.respond("/chat/completions", R"({"choices":[{"message":{"role":"assistant","content":"stub summary"}}]})");
  BackendConfig cfg;
  cfg.kind = BackendKind::openai_compatible;
  cfg.base_url = stub.url();
  cfg.timeout_s = 5;
  HttpBackend b(cfg);
  const auto r = summarize_map_reduce(b, four_chunks(), {});
  CHECK(r.total_calls() == 5);
  CHECK(stub.requests().size() == 5);
  CHECK(b.log().size() == 5);
}

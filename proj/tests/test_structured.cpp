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

#include "docfoundry/structured.hpp"
#include "support.hpp"

using namespace docfoundry;
using nlohmann::json;

namespace {

RecordSchema measured_quantity() {
  return {"MeasuredQuantity",
          {{"value", FieldType::string, "numerical value", true},
           {"unit", FieldType::string, "unit of measurement", true}}};
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("instructions name every field and are deterministic") {
  const auto text = schema_to_instruction(measured_quantity());
  CHECK(text.find("value") != std::string::npos);
  CHECK(text.find("numerical value") != std::string::npos);
  CHECK(text.find("unit of measurement") != std::string::npos);
  CHECK(text.find("JSON object") != std::string::npos);
  CHECK(schema_to_instruction(measured_quantity()) == text);

  const RecordSchema one{"Ref", {{"statute_ref", FieldType::string, "statute citation", true}}};
  const auto single = schema_to_instruction(one);
  CHECK(count(single, "\n- ") == 1);
  CHECK(count(text, "\n- ") == 2);
}

TEST_CASE("lenient JSON parsing") {
  CHECK(parse_json_lenient("```json\n{\"a\":1}\n```") == json{{"a", 1}});
  CHECK(parse_json_lenient("Sure! {\"a\":1} Hope that helps.") == json{{"a", 1}});
  CHECK(parse_json_lenient(R"(x {"s":"brace } in string","n":{"m":2}} tail {"b":3})") ==
        json{{"s", "brace } in string"}, {"n", {{"m", 2}}}});
  try {
    parse_json_lenient("no braces here");
    FAIL("expected no_json_found");
  } catch (const JsonExtractError& e) {
    CHECK(e.code() == "no_json_found");
  }
  try {
    parse_json_lenient("{\"a\": 1,}");
    FAIL("expected invalid_json");
  } catch (const JsonExtractError& e) {
    CHECK(e.code() == "invalid_json");
  }
  CHECK_THROWS_AS(parse_json_lenient("{\"a\": 1"), JsonExtractError);
}

TEST_CASE("validation reports paths and types") {
  const auto schema = measured_quantity();
  CHECK(validate(json{{"value", "35"}, {"unit", "mph"}}, schema).ok);

  const auto missing = validate(json{{"value", "35"}}, schema);
  CHECK(!missing.ok);
  REQUIRE(missing.errors.size() == 1);
  CHECK(missing.errors[0].path == "unit");

  const auto wrong = validate(json{{"value", 35}, {"unit", "mph"}}, schema);
  REQUIRE(wrong.errors.size() == 1);
  CHECK(wrong.errors[0].path == "value");
  CHECK(wrong.errors[0].message == "expected string, got number");

  const auto extra = validate(json{{"value", "35"}, {"unit", "mph"}, {"note", "x"}}, schema);
  CHECK(extra.ok);
  REQUIRE(extra.warnings.size() == 1);
  CHECK(extra.warnings[0].path == "note");

  CHECK(validate(json::array(), schema).errors[0].path == "$");

  const RecordSchema rich{"R",
                          {{"n", FieldType::number, "a number", true},
                           {"b", FieldType::boolean, "a flag", true},
                           {"tags", FieldType::string_array, "labels", true},
                           {"opt", FieldType::string, "optional", false}}};
  CHECK(validate(json{{"n", 1.5}, {"b", true}, {"tags", {"x", "y"}}}, rich).ok);
  CHECK(validate(json{{"n", 2}, {"b", false}, {"tags", json::array()}, {"opt", nullptr}}, rich).ok);
  const auto bad = validate(json{{"n", "1"}, {"b", 1}, {"tags", {"x", 2}}}, rich);
  std::vector<std::string> paths;
  for (const auto& e : bad.errors) paths.push_back(e.path);
  std::sort(paths.begin(), paths.end());
  CHECK(paths == std::vector<std::string>{"b", "n", "tags[1]"});
  CHECK(bad.ok == bad.errors.empty());

  const auto j = to_json(bad);
  CHECK(j["ok"] == false);
  CHECK(j["errors"].size() == 3);
}

TEST_CASE("schema checks") {
  CHECK(check_schema(measured_quantity()).ok);
  CHECK(!check_schema(RecordSchema{"E", {}}).ok);
  auto dup = measured_quantity();
  dup.fields[1].name = "value";
  const auto r = check_schema(dup);
  CHECK(!r.ok);
  CHECK(r.errors[0].path == "fields[1].name");
  auto nodesc = measured_quantity();
  nodesc.fields[0].description.clear();
  CHECK(!check_schema(nodesc).ok);

  const auto round = schema_from_json(to_json(measured_quantity()));
  CHECK(to_json(round) == to_json(measured_quantity()));
  CHECK_THROWS_AS(schema_from_json(to_json(dup)), SchemaError);
  CHECK_THROWS_AS(schema_from_json(json{{"name", "x"}, {"fields", {{{"name", "a"}, {"type", "date"}, {"description", "d"}}}}}),
                  SchemaError);
}

TEST_CASE("extraction and the repair loop") {
  const auto schema = measured_quantity();
  SUBCASE("first answer valid") {
    ScriptedBackend b({{"He was going 35 mph.", {R"({"value":"35","unit":"mph"})"}, false}});
    const auto r = extract_structured(b, "He was going 35 mph.", schema, true);
    CHECK(r.record["value"] == "35");
    CHECK(r.record["unit"] == "mph");
    CHECK(r.attempts_used == 1);
    CHECK(b.log().size() == 1);
  }
  SUBCASE("invalid then valid with attempt_fix") {
    ScriptedBackend b({{"", {"not json at all", R"(```json
{"value":"35","unit":"mph"}
```)"}, false}});
    const auto r = extract_structured(b, "He was going 35 mph.", schema, true);
    CHECK(r.attempts_used == 2);
    CHECK(b.log().size() == 2);
    const auto second = b.log().entries()[1].request.get<std::string>();
    CHECK(second.find("not json at all") != std::string::npos);
    CHECK(second.find("He was going 35 mph.") != std::string::npos);
  }
  SUBCASE("no repair without attempt_fix") {
    ScriptedBackend b({{"", {R"({"value":35})", R"({"value":"35","unit":"mph"})"}, false}});
    try {
      extract_structured(b, "He was going 35 mph.", schema, false);
      FAIL("expected exhaustion");
    } catch (const ExhaustedAttemptsError& e) {
      CHECK(e.attempts_used() == 1);
      CHECK(e.code() == "exhausted_attempts");
      CHECK(!e.report().ok);
    }
    CHECK(b.log().size() == 1);
  }
  SUBCASE("bounded attempts") {
    ScriptedBackend b({{"", {"{}"}, true}});
    CHECK_THROWS_AS(extract_structured(b, "x", schema, true, 3), ExhaustedAttemptsError);
    CHECK(b.log().size() == 3);
    CHECK_THROWS_AS(extract_structured(b, "x", schema, true, 0), InvalidArgumentError);
  }
  SUBCASE("backend errors propagate") {
    ScriptedBackend b;
    CHECK_THROWS_AS(extract_structured(b, "x", schema, true), BackendError);
    CHECK(b.log().size() == 1);
  }
}

TEST_CASE("repair prompt carries the errors") {
  ValidationReport r;
  r.error("unit", "missing required field");
  const auto p = repair_prompt("ORIGINAL", "{\"value\":\"35\"}", r);
  CHECK(p.rfind("ORIGINAL", 0) == 0);
  CHECK(p.find("unit: missing required field") != std::string::npos);
  CHECK(p.find("{\"value\":\"35\"}") != std::string::npos);
}

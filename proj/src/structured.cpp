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


#include "docfoundry/structured.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace docfoundry {

FieldType parse_field_type(std::string_view name) {
  if (name == "string") return FieldType::string;
  if (name == "number") return FieldType::number;
  if (name == "boolean") return FieldType::boolean;
  if (name == "string_array") return FieldType::string_array;
  throw InvalidArgumentError("unknown field type: " + std::string(name));
}

std::string_view to_string(FieldType type) {
  switch (type) {
    case FieldType::string: return "string";
    case FieldType::number: return "number";
    case FieldType::boolean: return "boolean";
    case FieldType::string_array: return "string_array";
  }
  return "string";
}

void ValidationReport::error(std::string path, std::string message) {
  errors.push_back({std::move(path), std::move(message)});
  ok = false;
}

void ValidationReport::warn(std::string path, std::string message) {
  warnings.push_back({std::move(path), std::move(message)});
}

nlohmann::json to_json(const ValidationReport& report) {
  auto issues = [](const std::vector<ValidationIssue>& list) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& i : list) arr.push_back({{"path", i.path}, {"message", i.message}});
    return arr;
  };
  return {{"ok", report.ok}, {"errors", issues(report.errors)}, {"warnings", issues(report.warnings)}};
}

ValidationReport check_schema(const RecordSchema& schema) {
  ValidationReport report;
  if (schema.name.empty()) report.error("name", "schema name is empty");
  if (schema.fields.empty()) report.error("fields", "schema has no fields");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < schema.fields.size(); ++i) {
    const auto& f = schema.fields[i];
    const std::string path = "fields[" + std::to_string(i) + "]";
    if (f.name.empty()) report.error(path + ".name", "field name is empty");
    if (!f.name.empty() && !seen.insert(f.name).second) report.error(path + ".name", "duplicate field name '" + f.name + "'");
    if (f.description.empty()) report.error(path + ".description", "field description is empty");
  }
  return report;
}

SchemaError::SchemaError(ValidationReport report)
    : Error("invalid_schema",
            "invalid schema" + (report.errors.empty() ? std::string()
                                                      : ": " + report.errors.front().path + ": " +
                                                            report.errors.front().message)),
      report_(std::move(report)) {}

RecordSchema schema_from_json(const nlohmann::json& j) {
  ValidationReport report;
  RecordSchema schema;
  if (!j.is_object()) {
    report.error("$", "schema must be a JSON object");
    throw SchemaError(report);
  }
  if (j.contains("name") && j["name"].is_string()) {
    schema.name = j["name"].get<std::string>();
  } else {
    report.error("name", "missing or non-string schema name");
  }
  if (!j.contains("fields") || !j["fields"].is_array()) {
    report.error("fields", "missing or non-array fields");
    throw SchemaError(report);
  }
  for (std::size_t i = 0; i < j["fields"].size(); ++i) {
    const auto& fj = j["fields"][i];
    const std::string path = "fields[" + std::to_string(i) + "]";
    if (!fj.is_object()) {
      report.error(path, "field must be an object");
      continue;
    }
    FieldSpec f;
    if (fj.contains("name") && fj["name"].is_string()) f.name = fj["name"].get<std::string>();
    else report.error(path + ".name", "missing or non-string name");
    if (fj.contains("description") && fj["description"].is_string()) f.description = fj["description"].get<std::string>();
    else report.error(path + ".description", "missing or non-string description");
    if (fj.contains("type") && fj["type"].is_string()) {
      try {
        f.type = parse_field_type(fj["type"].get<std::string>());
      } catch (const InvalidArgumentError& e) {
        report.error(path + ".type", e.what());
      }
    } else {
      report.error(path + ".type", "missing or non-string type");
    }
    if (fj.contains("required")) {
      if (fj["required"].is_boolean()) f.required = fj["required"].get<bool>();
      else report.error(path + ".required", "required must be a boolean");
    }
    schema.fields.push_back(std::move(f));
  }
  // Structural errors found above already cover empty names/descriptions.
  for (auto& issue : check_schema(schema).errors) {
    const bool known = std::any_of(report.errors.begin(), report.errors.end(),
                                   [&](const ValidationIssue& e) { return e.path == issue.path; });
    if (!known) report.error(issue.path, issue.message);
  }
  if (!report.ok) throw SchemaError(report);
  return schema;
}

nlohmann::json to_json(const RecordSchema& schema) {
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : schema.fields) {
    fields.push_back({{"name", f.name}, {"type", to_string(f.type)}, {"description", f.description}, {"required", f.required}});
  }
  return {{"name", schema.name}, {"fields", fields}};
}

RecordSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open schema " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    ValidationReport report;
    report.error("$", std::string("schema file is not valid JSON: ") + e.what());
    throw SchemaError(report);
  }
  return schema_from_json(j);
}

std::string schema_to_instruction(const RecordSchema& schema) {
  std::string out = "Extract a " + schema.name + " record from the input.\nFields:\n";
  for (const auto& f : schema.fields) {
    out += "- " + f.name + " (" + std::string(to_string(f.type)) + (f.required ? ", required" : ", optional") +
           "): " + f.description + "\n";
  }
  out += "Answer with a single JSON object containing these fields and nothing else.";
  return out;
}

namespace {

// Returns the content of the first ``` fence, or the whole text.
std::pair<std::string_view, std::size_t> strip_fence(std::string_view text) {
  const auto open = text.find("```");
  if (open == std::string_view::npos) return {text, 0};
  auto body = text.find('\n', open);
  if (body == std::string_view::npos) return {text, 0};
  ++body;
  const auto close = text.find("```", body);
  if (close == std::string_view::npos) return {text.substr(body), body};
  return {text.substr(body, close - body), body};
}

}  // namespace

nlohmann::json parse_json_lenient(std::string_view text) {
  auto [body, base] = strip_fence(text);
  auto start = body.find('{');
  if (start == std::string_view::npos) {
    // A fence without an object: fall back to the full text.
    body = text;
    base = 0;
    start = body.find('{');
  }
  if (start == std::string_view::npos) throw JsonExtractError("no_json_found", "no JSON object found", 0);
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  std::size_t end = std::string_view::npos;
  for (std::size_t i = start; i < body.size(); ++i) {
    const char c = body[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) {
      end = i + 1;
      break;
    }
  }
  if (end == std::string_view::npos) {
    throw JsonExtractError("invalid_json", "unbalanced JSON object", base + start);
  }
  try {
    return nlohmann::json::parse(body.substr(start, end - start));
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t byte = e.byte == 0 ? 0 : e.byte - 1;
    throw JsonExtractError("invalid_json", std::string("invalid JSON: ") + e.what(), base + start + byte);
  }
}

ValidationReport validate(const nlohmann::json& value, const RecordSchema& schema) {
  ValidationReport report;
  if (!value.is_object()) {
    report.error("$", "expected a JSON object, got " + std::string(value.type_name()));
    return report;
  }
  std::set<std::string> known;
  for (const auto& f : schema.fields) {
    known.insert(f.name);
    const auto it = value.find(f.name);
    if (it == value.end() || it->is_null()) {
      if (f.required) report.error(f.name, "missing required field");
      continue;
    }
    switch (f.type) {
      case FieldType::string:
        if (!it->is_string()) report.error(f.name, "expected string, got " + std::string(it->type_name()));
        break;
      case FieldType::number:
        if (!it->is_number()) report.error(f.name, "expected number, got " + std::string(it->type_name()));
        break;
      case FieldType::boolean:
        if (!it->is_boolean()) report.error(f.name, "expected boolean, got " + std::string(it->type_name()));
        break;
      case FieldType::string_array:
        if (!it->is_array()) {
          report.error(f.name, "expected array of strings, got " + std::string(it->type_name()));
          break;
        }
        for (std::size_t i = 0; i < it->size(); ++i) {
          if (!(*it)[i].is_string()) {
            report.error(f.name + "[" + std::to_string(i) + "]",
                         "expected string, got " + std::string((*it)[i].type_name()));
          }
        }
        break;
    }
  }
  for (const auto& [key, _] : value.items()) {
    if (!known.contains(key)) report.warn(key, "unexpected field");
  }
  return report;
}

ValidationReport validate_output(std::string_view raw_output, const RecordSchema& schema, nlohmann::json* parsed) {
  try {
    auto value = parse_json_lenient(raw_output);
    auto report = validate(value, schema);
    if (parsed) *parsed = std::move(value);
    return report;
  } catch (const JsonExtractError& e) {
    ValidationReport report;
    report.error("$", std::string(e.code() == "no_json_found" ? "no JSON object found" : "unparseable JSON") + ": " +
                          e.what());
    return report;
  }
}

std::string extraction_prompt(const RecordSchema& schema, std::string_view input_text) {
  return schema_to_instruction(schema) + "\n\nInput:\n" + std::string(input_text);
}

std::string repair_prompt(std::string_view original_prompt, std::string_view prior_output,
                          const ValidationReport& report) {
  std::string out(original_prompt);
  out += "\n\nYour previous answer was:\n";
  out += prior_output;
  out += "\n\nIt failed validation with these errors:\n";
  for (const auto& e : report.errors) out += "- " + e.path + ": " + e.message + "\n";
  out += "Validation report: " + to_json(report).dump() + "\n";
  out += "Reply with a corrected JSON object only.";
  return out;
}

ExhaustedAttemptsError::ExhaustedAttemptsError(ValidationReport report, std::size_t attempts, std::string last_output)
    : Error("exhausted_attempts", "no valid output after " + std::to_string(attempts) + " attempt(s)"),
      report_(std::move(report)),
      attempts_(attempts),
      last_output_(std::move(last_output)) {}

StructuredResult extract_structured_prompt(Backend& backend, std::string prompt, const RecordSchema& schema,
                                           bool attempt_fix, std::size_t max_attempts,
                                           const GenerationParams& params) {
  if (max_attempts == 0) throw InvalidArgumentError("max_attempts must be at least 1");
  const std::size_t limit = attempt_fix ? max_attempts : 1;
  const std::string original = prompt;
  ValidationReport report;
  std::string output;
  for (std::size_t attempt = 1; attempt <= limit; ++attempt) {
    output = backend.complete(prompt, params).text;
    nlohmann::json parsed;
    report = validate_output(output, schema, &parsed);
    if (report.ok) return StructuredResult{std::move(parsed), attempt, std::move(report)};
    prompt = repair_prompt(original, output, report);
  }
  throw ExhaustedAttemptsError(std::move(report), limit, std::move(output));
}

StructuredResult extract_structured(Backend& backend, std::string_view input_text, const RecordSchema& schema,
                                    bool attempt_fix, std::size_t max_attempts, const GenerationParams& params) {
  return extract_structured_prompt(backend, extraction_prompt(schema, input_text), schema, attempt_fix,
                                   max_attempts, params);
}

}  // namespace docfoundry

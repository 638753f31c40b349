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

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "docfoundry/llm.hpp"
#include "docfoundry/types.hpp"

namespace docfoundry {

enum class FieldType { string, number, boolean, string_array };

FieldType parse_field_type(std::string_view name);
std::string_view to_string(FieldType type);

struct FieldSpec {
  std::string name;
  FieldType type = FieldType::string;
  std::string description;
  bool required = true;
};

struct RecordSchema {
  std::string name;
  std::vector<FieldSpec> fields;
};

struct ValidationIssue {
  std::string path;  // field name, "tags[2]" for array items, "$" for the whole value
  std::string message;
  bool operator==(const ValidationIssue&) const = default;
};

struct ValidationReport {
  bool ok = true;
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;

  void error(std::string path, std::string message);
  void warn(std::string path, std::string message);
};

nlohmann::json to_json(const ValidationReport& report);

/// Structural checks on a schema: at least one field, unique non-empty
/// names, non-empty descriptions.
ValidationReport check_schema(const RecordSchema& schema);

class SchemaError : public Error {
 public:
  explicit SchemaError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

/// {name, fields:[{name, type, description, required}]}. Throws SchemaError
/// when the JSON is malformed or check_schema() fails.
RecordSchema schema_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RecordSchema& schema);
RecordSchema load_schema(const std::filesystem::path& path);

std::string schema_to_instruction(const RecordSchema& schema);

class JsonExtractError : public Error {
 public:
  JsonExtractError(std::string code, const std::string& message, std::size_t position)
      : Error(std::move(code), message + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Strips code fences and surrounding prose, then strictly parses the first
/// balanced top-level object. Codes: "no_json_found", "invalid_json".
nlohmann::json parse_json_lenient(std::string_view text);

/// Never throws. Integers and decimals both satisfy `number`; unknown
/// fields become warnings.
ValidationReport validate(const nlohmann::json& value, const RecordSchema& schema);

/// Lenient parse plus validate; parse failures become a "$" error.
ValidationReport validate_output(std::string_view raw_output, const RecordSchema& schema, nlohmann::json* parsed);

std::string extraction_prompt(const RecordSchema& schema, std::string_view input_text);

/// The original prompt followed by the prior output, one line per error and
/// the serialized report.
std::string repair_prompt(std::string_view original_prompt, std::string_view prior_output,
                          const ValidationReport& report);

struct StructuredResult {
  nlohmann::json record;
  std::size_t attempts_used = 0;
  ValidationReport report;  // warnings of the accepted output
};

class ExhaustedAttemptsError : public Error {
 public:
  ExhaustedAttemptsError(ValidationReport report, std::size_t attempts, std::string last_output);
  const ValidationReport& report() const { return report_; }
  std::size_t attempts_used() const { return attempts_; }
  const std::string& last_output() const { return last_output_; }

 private:
  ValidationReport report_;
  std::size_t attempts_;
  std::string last_output_;
};

/// Prompts until the output validates. Without `attempt_fix` only one call is
/// made. Backend errors propagate unchanged.
StructuredResult extract_structured(Backend& backend, std::string_view input_text, const RecordSchema& schema,
                                    bool attempt_fix, std::size_t max_attempts = 3,
                                    const GenerationParams& params = {});

/// Same loop with a caller-built first prompt.
StructuredResult extract_structured_prompt(Backend& backend, std::string prompt, const RecordSchema& schema,
                                           bool attempt_fix, std::size_t max_attempts = 3,
                                           const GenerationParams& params = {});

}  // namespace docfoundry

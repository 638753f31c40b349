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
#include <string>
#include <string_view>
#include <vector>

#include "docfoundry/types.hpp"

namespace docfoundry {

/// Boolean query tree.
///
/// Grammar, loosest binding first:
///
///     query   := and ("OR" and)*
///     and     := unary (["AND"] unary)*       adjacency means AND
///     unary   := "NOT" unary | primary
///     primary := "(" query ")" | "\"" words "\"" | name ":" (word | "\"" words "\"") | word
///
/// Operators are upper-case keywords. A word is a run of characters other than
/// whitespace, parentheses and double quotes. Nested And/Or of the same kind
/// are flattened, so parsing is canonical.
struct QueryNode {
  enum class Kind { term, phrase, field, all_of, any_of, negate };

  Kind kind = Kind::term;
  std::string text;                // term text, or the field value
  std::string field;               // field name for Kind::field
  std::vector<std::string> words;  // phrase words
  std::vector<QueryNode> children;
  std::size_t position = 0;  // source offset; ignored by ==

  static QueryNode term(std::string text);
  static QueryNode phrase(std::vector<std::string> words);
  static QueryNode field_filter(std::string field, std::string value);
  static QueryNode all_of(std::vector<QueryNode> children);
  static QueryNode any_of(std::vector<QueryNode> children);
  static QueryNode negate(QueryNode child);

  bool is_leaf() const { return kind == Kind::term || kind == Kind::phrase || kind == Kind::field; }

  friend bool operator==(const QueryNode& a, const QueryNode& b) {
    return a.kind == b.kind && a.text == b.text && a.field == b.field && a.words == b.words &&
           a.children == b.children;
  }
};

class QuerySyntaxError : public Error {
 public:
  QuerySyntaxError(const std::string& message, std::size_t position)
      : Error("query_syntax", message + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Throws QuerySyntaxError, including for NOT without a positive AND sibling.
QueryNode parse_query(std::string_view query);

/// Canonical text form; parse_query(render_query(n)) == n for parsed trees.
std::string render_query(const QueryNode& node);

/// Throws QuerySyntaxError when a NOT node is not an AND child alongside at
/// least one non-NOT sibling.
void check_negations(const QueryNode& node);

/// Words from positive Term/Phrase leaves joined by spaces; used as the
/// plain-text form of a query for embedding.
std::string positive_text(const QueryNode& node);

/// OR of the distinct analysed terms of `text`, for natural-language
/// questions. Throws QuerySyntaxError when `text` has no searchable terms.
QueryNode free_text_query(std::string_view text);

}  // namespace docfoundry

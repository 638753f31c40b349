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
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace docfoundry {

/// Tokens are maximal runs of ASCII letters/digits; bytes >= 0x80 count as
/// letters so UTF-8 words stay whole.
struct AnalyzerConfig {
  bool lowercase = true;
  std::set<std::string> stopwords;

  bool operator==(const AnalyzerConfig&) const = default;
};

struct Token {
  std::string term;
  std::size_t start = 0;  // byte offsets into the analysed text
  std::size_t end = 0;
  std::size_t position = 0;  // index among emitted tokens
};

std::vector<Token> analyze(std::string_view text, const AnalyzerConfig& cfg);

/// Terms only, in order.
std::vector<std::string> analyze_terms(std::string_view text, const AnalyzerConfig& cfg);

/// Small English function-word list used for content-word overlap.
const std::set<std::string>& english_stopwords();

}  // namespace docfoundry

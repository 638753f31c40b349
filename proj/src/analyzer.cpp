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

#include "docfoundry/analyzer.hpp"

namespace docfoundry {

namespace {

bool is_token_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

}  // namespace

std::vector<Token> analyze(std::string_view text, const AnalyzerConfig& cfg) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_token_char(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size()) break;
    const std::size_t start = i;
    while (i < text.size() && is_token_char(static_cast<unsigned char>(text[i]))) ++i;
    std::string term(text.substr(start, i - start));
    if (cfg.lowercase) {
      for (char& c : term) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      }
    }
    if (cfg.stopwords.contains(term)) continue;
    tokens.push_back({std::move(term), start, i, tokens.size()});
  }
  return tokens;
}

std::vector<std::string> analyze_terms(std::string_view text, const AnalyzerConfig& cfg) {
  std::vector<std::string> terms;
  for (auto& t : analyze(text, cfg)) terms.push_back(std::move(t.term));
  return terms;
}

const std::set<std::string>& english_stopwords() {
  static const std::set<std::string> kWords = {
      "a",     "about", "above", "after", "again", "all",   "also",  "am",    "an",    "and",   "any",
      "are",   "as",    "at",    "be",    "been",  "being", "but",   "by",    "can",   "could", "did",
      "do",    "does",  "for",   "from",  "had",   "has",   "have",  "he",    "her",   "here",  "him",
      "his",   "how",   "i",     "if",    "in",    "into",  "is",    "it",    "its",   "me",    "more",
      "most",  "my",    "no",    "not",   "of",    "on",    "or",    "our",   "she",   "so",    "some",
      "such",  "than",  "that",  "the",   "their", "them",  "then",  "there", "these", "they",  "this",
      "those", "to",    "too",   "under", "up",    "very",  "was",   "we",    "were",  "what",  "when",
      "where", "which", "while", "who",   "whom",  "why",   "will",  "with",  "would", "you",   "your"};
  return kWords;
}

}  // namespace docfoundry

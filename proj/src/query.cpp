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

#include "docfoundry/query.hpp"

#include <algorithm>
#include <set>

#include "docfoundry/analyzer.hpp"

namespace docfoundry {

QueryNode QueryNode::term(std::string text) {
  QueryNode n;
  n.kind = Kind::term;
  n.text = std::move(text);
  return n;
}

QueryNode QueryNode::phrase(std::vector<std::string> words) {
  QueryNode n;
  n.kind = Kind::phrase;
  n.words = std::move(words);
  return n;
}

QueryNode QueryNode::field_filter(std::string field, std::string value) {
  QueryNode n;
  n.kind = Kind::field;
  n.field = std::move(field);
  n.text = std::move(value);
  return n;
}

namespace {

QueryNode make_group(QueryNode::Kind kind, std::vector<QueryNode> children) {
  QueryNode n;
  n.kind = kind;
  for (auto& c : children) {
    if (c.kind == kind) {
      for (auto& g : c.children) n.children.push_back(std::move(g));
    } else {
      n.children.push_back(std::move(c));
    }
  }
  return n;
}

}  // namespace

QueryNode QueryNode::all_of(std::vector<QueryNode> children) { return make_group(Kind::all_of, std::move(children)); }
QueryNode QueryNode::any_of(std::vector<QueryNode> children) { return make_group(Kind::any_of, std::move(children)); }

QueryNode QueryNode::negate(QueryNode child) {
  QueryNode n;
  n.kind = Kind::negate;
  n.children.push_back(std::move(child));
  return n;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_word_char(char c) { return !is_space(c) && c != '(' && c != ')' && c != '"'; }

bool is_field_name(std::string_view s) {
  if (s.empty()) return false;
  const auto first = static_cast<unsigned char>(s[0]);
  if (!std::isalpha(first) && first != '_') return false;
  return std::all_of(s.begin() + 1, s.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_' || c == '.' || c == '-';
  });
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) words.emplace_back(s.substr(start, i - start));
  }
  return words;
}

struct Lexeme {
  enum class Type { lparen, rparen, word, phrase, field, op_and, op_or, op_not, end };
  Type type = Type::end;
  std::string text;
  std::string field;
  std::size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view q) : q_(q) {}

  std::vector<Lexeme> run() {
    std::vector<Lexeme> out;
    while (true) {
      while (i_ < q_.size() && is_space(q_[i_])) ++i_;
      if (i_ == q_.size()) {
        out.push_back({Lexeme::Type::end, {}, {}, i_});
        return out;
      }
      const std::size_t start = i_;
      const char c = q_[i_];
      if (c == '(') {
        ++i_;
        out.push_back({Lexeme::Type::lparen, "(", {}, start});
      } else if (c == ')') {
        ++i_;
        out.push_back({Lexeme::Type::rparen, ")", {}, start});
      } else if (c == '"') {
        out.push_back({Lexeme::Type::phrase, quoted(), {}, start});
      } else {
        while (i_ < q_.size() && is_word_char(q_[i_])) ++i_;
        std::string word(q_.substr(start, i_ - start));
        const auto colon = word.find(':');
        if (word == "AND") {
          out.push_back({Lexeme::Type::op_and, word, {}, start});
        } else if (word == "OR") {
          out.push_back({Lexeme::Type::op_or, word, {}, start});
        } else if (word == "NOT") {
          out.push_back({Lexeme::Type::op_not, word, {}, start});
        } else if (colon != std::string::npos && is_field_name(std::string_view(word).substr(0, colon))) {
          std::string value = word.substr(colon + 1);
          if (value.empty() && i_ < q_.size() && q_[i_] == '"') {
            value = quoted();
            if (split_words(value).empty()) throw QuerySyntaxError("empty field value", start);
          } else if (value.empty()) {
            throw QuerySyntaxError("missing value for field '" + word.substr(0, colon) + "'", start);
          }
          out.push_back({Lexeme::Type::field, std::move(value), word.substr(0, colon), start});
        } else {
          out.push_back({Lexeme::Type::word, std::move(word), {}, start});
        }
      }
    }
  }

 private:
  std::string quoted() {
    const std::size_t open = i_++;
    const auto close = q_.find('"', i_);
    if (close == std::string_view::npos) throw QuerySyntaxError("unterminated quote", open);
    std::string s(q_.substr(i_, close - i_));
    i_ = close + 1;
    return s;
  }

  std::string_view q_;
  std::size_t i_ = 0;
};

class Parser {
 public:
  explicit Parser(std::vector<Lexeme> lexemes) : lx_(std::move(lexemes)) {}

  QueryNode parse() {
    QueryNode root = parse_or();
    if (peek().type != Lexeme::Type::end) {
      throw QuerySyntaxError("unexpected '" + peek().text + "'", peek().pos);
    }
    return root;
  }

 private:
  const Lexeme& peek() const { return lx_[i_]; }
  const Lexeme& next() { return lx_[i_++]; }

  bool starts_unary() const {
    switch (peek().type) {
      case Lexeme::Type::lparen:
      case Lexeme::Type::word:
      case Lexeme::Type::phrase:
      case Lexeme::Type::field:
      case Lexeme::Type::op_not:
        return true;
      default:
        return false;
    }
  }

  void expect_operand(const Lexeme& op) {
    if (!starts_unary()) throw QuerySyntaxError("expected a term after " + op.text, peek().pos);
  }

  QueryNode parse_or() {
    std::vector<QueryNode> items;
    items.push_back(parse_and());
    while (peek().type == Lexeme::Type::op_or) {
      const Lexeme op = next();
      expect_operand(op);
      items.push_back(parse_and());
    }
    return items.size() == 1 ? std::move(items.front()) : QueryNode::any_of(std::move(items));
  }

  QueryNode parse_and() {
    const std::size_t pos = peek().pos;
    std::vector<QueryNode> items;
    items.push_back(parse_unary());
    while (true) {
      if (peek().type == Lexeme::Type::op_and) {
        const Lexeme op = next();
        expect_operand(op);
        items.push_back(parse_unary());
      } else if (starts_unary()) {
        items.push_back(parse_unary());
      } else {
        break;
      }
    }
    if (items.size() == 1) return std::move(items.front());
    QueryNode n = QueryNode::all_of(std::move(items));
    n.position = pos;
    return n;
  }

  QueryNode parse_unary() {
    if (peek().type == Lexeme::Type::op_not) {
      const Lexeme op = next();
      expect_operand(op);
      QueryNode n = QueryNode::negate(parse_unary());
      n.position = op.pos;
      return n;
    }
    return parse_primary();
  }

  QueryNode parse_primary() {
    const Lexeme lx = next();
    QueryNode n;
    switch (lx.type) {
      case Lexeme::Type::lparen: {
        if (peek().type == Lexeme::Type::rparen) throw QuerySyntaxError("empty parentheses", lx.pos);
        n = parse_or();
        if (peek().type != Lexeme::Type::rparen) throw QuerySyntaxError("unclosed parenthesis", lx.pos);
        next();
        return n;
      }
      case Lexeme::Type::word:
        n = QueryNode::term(lx.text);
        break;
      case Lexeme::Type::phrase: {
        auto words = split_words(lx.text);
        if (words.empty()) throw QuerySyntaxError("empty phrase", lx.pos);
        n = QueryNode::phrase(std::move(words));
        break;
      }
      case Lexeme::Type::field:
        n = QueryNode::field_filter(lx.field, lx.text);
        break;
      case Lexeme::Type::end:
        throw QuerySyntaxError("unexpected end of query", lx.pos);
      default:
        throw QuerySyntaxError("unexpected '" + lx.text + "'", lx.pos);
    }
    n.position = lx.pos;
    return n;
  }

  std::vector<Lexeme> lx_;
  std::size_t i_ = 0;
};

void check_node(const QueryNode& node, const QueryNode* parent) {
  if (node.kind == QueryNode::Kind::negate) {
    const bool ok = parent != nullptr && parent->kind == QueryNode::Kind::all_of &&
                    std::any_of(parent->children.begin(), parent->children.end(),
                                [](const QueryNode& c) { return c.kind != QueryNode::Kind::negate; });
    if (!ok) throw QuerySyntaxError("NOT requires a positive sibling under AND", node.position);
  }
  for (const auto& c : node.children) check_node(c, &node);
}

bool needs_quotes(std::string_view value) {
  return value.empty() || std::any_of(value.begin(), value.end(), [](char c) { return !is_word_char(c); });
}

void collect_positive(const QueryNode& node, std::vector<std::string>& out) {
  switch (node.kind) {
    case QueryNode::Kind::term:
      out.push_back(node.text);
      break;
    case QueryNode::Kind::phrase:
      out.insert(out.end(), node.words.begin(), node.words.end());
      break;
    case QueryNode::Kind::negate:
    case QueryNode::Kind::field:
      break;
    default:
      for (const auto& c : node.children) collect_positive(c, out);
  }
}

}  // namespace

void check_negations(const QueryNode& node) { check_node(node, nullptr); }

QueryNode parse_query(std::string_view query) {
  if (split_words(query).empty()) throw QuerySyntaxError("empty query", 0);
  QueryNode root = Parser(Lexer(query).run()).parse();
  check_negations(root);
  return root;
}

std::string render_query(const QueryNode& node) {
  switch (node.kind) {
    case QueryNode::Kind::term:
      return node.text;
    case QueryNode::Kind::phrase: {
      std::string s = "\"";
      for (std::size_t i = 0; i < node.words.size(); ++i) {
        if (i) s += ' ';
        s += node.words[i];
      }
      return s + "\"";
    }
    case QueryNode::Kind::field:
      return node.field + ":" + (needs_quotes(node.text) ? "\"" + node.text + "\"" : node.text);
    case QueryNode::Kind::negate: {
      const auto& c = node.children.front();
      const std::string inner = render_query(c);
      return "NOT " + (c.is_leaf() || c.kind == QueryNode::Kind::negate ? inner : "(" + inner + ")");
    }
    case QueryNode::Kind::all_of:
    case QueryNode::Kind::any_of: {
      const bool is_and = node.kind == QueryNode::Kind::all_of;
      std::string s;
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        const auto& c = node.children[i];
        if (i) s += is_and ? " AND " : " OR ";
        const bool wrap = c.kind == QueryNode::Kind::any_of || c.kind == QueryNode::Kind::all_of;
        s += wrap ? "(" + render_query(c) + ")" : render_query(c);
      }
      return s;
    }
  }
  return {};
}

std::string positive_text(const QueryNode& node) {
  std::vector<std::string> words;
  collect_positive(node, words);
  std::string s;
  for (const auto& w : words) {
    if (!s.empty()) s += ' ';
    s += w;
  }
  return s;
}

QueryNode free_text_query(std::string_view text) {
  std::set<std::string> seen;
  std::vector<QueryNode> terms;
  for (auto& t : analyze_terms(text, AnalyzerConfig{})) {
    if (seen.insert(t).second) terms.push_back(QueryNode::term(std::move(t)));
  }
  if (terms.empty()) throw QuerySyntaxError("no searchable terms", 0);
  if (terms.size() == 1) return std::move(terms.front());
  return QueryNode::any_of(std::move(terms));
}

}  // namespace docfoundry

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

#include "docfoundry/ingest.hpp"

#include <fnmatch.h>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

namespace docfoundry {

namespace fs = std::filesystem;

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), is_space);
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error("io", "read failed for " + path.string());
  return ss.str();
}

// Strips <tag>s, drops script/style/comment bodies and decodes the common entities.
std::string strip_html(std::string_view html) {
  std::string out;
  out.reserve(html.size());
  const std::string lower = to_lower_ascii(html);
  std::size_t i = 0;
  auto skip_past = [&](std::string_view needle) {
    const auto pos = lower.find(needle, i);
    i = pos == std::string::npos ? html.size() : pos + needle.size();
  };
  static constexpr std::array<std::string_view, 12> kBlockTags = {
      "p", "br", "div", "li", "tr", "h1", "h2", "h3", "h4", "h5", "h6", "section"};
  while (i < html.size()) {
    const char c = html[i];
    if (c == '<') {
      if (lower.compare(i, 4, "<!--") == 0) {
        skip_past("-->");
        continue;
      }
      if (lower.compare(i, 7, "<script") == 0) {
        skip_past("</script>");
        continue;
      }
      if (lower.compare(i, 6, "<style") == 0) {
        skip_past("</style>");
        continue;
      }
      const auto close = html.find('>', i);
      if (close == std::string_view::npos) break;
      std::size_t name_begin = i + 1;
      if (name_begin < close && html[name_begin] == '/') ++name_begin;
      std::size_t name_end = name_begin;
      while (name_end < close && std::isalnum(static_cast<unsigned char>(html[name_end]))) ++name_end;
      const std::string name = lower.substr(name_begin, name_end - name_begin);
      if (std::find(kBlockTags.begin(), kBlockTags.end(), name) != kBlockTags.end()) {
        out += '\n';
      } else {
        out += ' ';
      }
      i = close + 1;
      continue;
    }
    if (c == '&') {
      const auto semi = html.find(';', i);
      if (semi != std::string_view::npos && semi - i <= 8) {
        const std::string entity = lower.substr(i + 1, semi - i - 1);
        std::string decoded;
        if (entity == "amp") decoded = "&";
        else if (entity == "lt") decoded = "<";
        else if (entity == "gt") decoded = ">";
        else if (entity == "quot") decoded = "\"";
        else if (entity == "apos" || entity == "#39") decoded = "'";
        else if (entity == "nbsp") decoded = " ";
        else if (entity.size() > 1 && entity[0] == '#') {
          long code = 0;
          try {
            code = entity[1] == 'x' ? std::stol(entity.substr(2), nullptr, 16) : std::stol(entity.substr(1));
          } catch (...) {
            code = 0;
          }
          if (code > 0 && code < 0x80) decoded = std::string(1, static_cast<char>(code));
        }
        if (!decoded.empty()) {
          out += decoded;
          i = semi + 1;
          continue;
        }
      }
    }
    out += c;
    ++i;
  }
  return out;
}

bool glob_match(const std::string& pattern, const std::string& rel, const std::string& name) {
  return fnmatch(pattern.c_str(), rel.c_str(), 0) == 0 || fnmatch(pattern.c_str(), name.c_str(), 0) == 0;
}

constexpr std::array<std::string_view, 4> kExtensions = {".txt", ".md", ".html", ".csv"};

}  // namespace

std::string content_hash(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("hash", "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0x0f];
  }
  return hex;
}

std::string make_doc_id(std::string_view source_path, std::string_view hash) {
  std::string key(source_path);
  key += '\0';
  key += hash;
  return content_hash(key).substr(0, 16);
}

UnitKind parse_unit_kind(std::string_view name) {
  if (name == "sentence") return UnitKind::sentence;
  if (name == "paragraph") return UnitKind::paragraph;
  if (name == "passage") return UnitKind::passage;
  throw InvalidArgumentError("unknown unit kind: " + std::string(name));
}

std::string_view to_string(UnitKind unit) {
  switch (unit) {
    case UnitKind::sentence: return "sentence";
    case UnitKind::paragraph: return "paragraph";
    case UnitKind::passage: return "passage";
  }
  return "passage";
}

void ChunkingConfig::validate() const {
  if (chunk_size_words == 0) throw InvalidArgumentError("chunk_size_words must be positive");
  if (overlap_words >= chunk_size_words) {
    throw InvalidArgumentError("overlap_words must be smaller than chunk_size_words");
  }
}

std::vector<Span> word_spans(std::string_view text) {
  std::vector<Span> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i == text.size()) break;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    spans.push_back({start, i});
  }
  return spans;
}

std::string normalize_text(std::string_view raw, std::string_view extension) {
  std::string text;
  text.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\r') {
      text += '\n';
      if (i + 1 < raw.size() && raw[i + 1] == '\n') ++i;
    } else {
      text += raw[i];
    }
  }
  // UTF-8 byte order mark
  if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) text.erase(0, 3);
  if (to_lower_ascii(extension) == ".html") text = strip_html(text);
  return text;
}

DocumentRecord make_document(std::string source_path, std::string_view raw_bytes, Metadata user_metadata,
                             std::string ingested_at) {
  const auto ext = fs::path(source_path).extension().string();
  DocumentRecord doc;
  doc.text = normalize_text(raw_bytes, ext);
  if (is_blank(doc.text)) throw InvalidArgumentError("empty after normalization: " + source_path);
  doc.content_hash = content_hash(raw_bytes);
  doc.doc_id = make_doc_id(source_path, doc.content_hash);
  doc.metadata = std::move(user_metadata);
  doc.metadata["extension"] = to_lower_ascii(ext);
  doc.metadata["size_bytes"] = std::to_string(raw_bytes.size());
  doc.source_path = std::move(source_path);
  doc.ingested_at = ingested_at.empty() ? utc_now_iso8601() : std::move(ingested_at);
  return doc;
}

std::span<const std::string_view> supported_extensions() { return kExtensions; }

LoadResult load_directory(const fs::path& root, const std::vector<std::string>& include_globs) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw NotFoundError("directory not found: " + root.string());

  std::vector<std::pair<std::string, fs::path>> files;
  for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied, ec);
       it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) break;
    if (!it->is_regular_file(ec)) continue;
    const std::string rel = fs::relative(it->path(), root, ec).generic_string();
    if (rel.ends_with(".meta.json")) continue;
    files.emplace_back(rel, it->path());
  }
  std::sort(files.begin(), files.end());

  LoadResult result;
  const std::string now = utc_now_iso8601();
  for (const auto& [rel, path] : files) {
    const std::string name = path.filename().string();
    if (!include_globs.empty() &&
        std::none_of(include_globs.begin(), include_globs.end(),
                     [&](const std::string& g) { return glob_match(g, rel, name); })) {
      continue;
    }
    const std::string ext = to_lower_ascii(path.extension().string());
    if (std::find(kExtensions.begin(), kExtensions.end(), ext) == kExtensions.end()) {
      if (!include_globs.empty()) result.issues.push_back({rel, "unsupported extension"});
      continue;
    }
    try {
      Metadata meta;
      const fs::path sidecar = path.string() + ".meta.json";
      if (fs::exists(sidecar)) {
        const auto j = nlohmann::json::parse(read_file(sidecar));
        for (const auto& [k, v] : j.items()) meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
      result.documents.push_back(make_document(rel, read_file(path), std::move(meta), now));
    } catch (const std::exception& e) {
      result.issues.push_back({rel, e.what()});
    }
  }
  return result;
}

std::vector<Chunk> chunk_document(const DocumentRecord& doc, const ChunkingConfig& cfg) {
  cfg.validate();
  const auto words = word_spans(doc.text);
  std::vector<Chunk> chunks;
  const std::size_t step = cfg.chunk_size_words - cfg.overlap_words;
  for (std::size_t start = 0; start < words.size(); start += step) {
    const std::size_t end = std::min(start + cfg.chunk_size_words, words.size());
    Chunk c;
    c.doc_id = doc.doc_id;
    c.chunk_index = static_cast<std::uint32_t>(chunks.size());
    c.start_word = start;
    c.end_word = end;
    c.start_char = words[start].start;
    c.end_char = words[end - 1].end;
    c.text = doc.text.substr(c.start_char, c.end_char - c.start_char);
    c.metadata = doc.metadata;
    c.metadata["source_path"] = doc.source_path;
    c.metadata["chunk_index"] = std::to_string(c.chunk_index);
    chunks.push_back(std::move(c));
    if (end == words.size()) break;
  }
  return chunks;
}

namespace {

void push_trimmed(std::string_view text, std::size_t begin, std::size_t end, std::vector<Span>& out) {
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  if (begin < end) out.push_back({begin, end});
}

bool starts_sentence(char c) { return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'); }

}  // namespace

std::vector<Span> segment_units(std::string_view text, UnitKind unit, const ChunkingConfig& passage_cfg) {
  std::vector<Span> spans;
  switch (unit) {
    case UnitKind::sentence: {
      std::size_t begin = 0;
      for (std::size_t i = 0; i + 1 < text.size(); ++i) {
        const char c = text[i];
        if ((c != '.' && c != '?' && c != '!') || !is_space(text[i + 1])) continue;
        std::size_t j = i + 1;
        while (j < text.size() && is_space(text[j])) ++j;
        if (j < text.size() && starts_sentence(text[j])) {
          push_trimmed(text, begin, i + 1, spans);
          begin = i + 1;
        }
      }
      push_trimmed(text, begin, text.size(), spans);
      break;
    }
    case UnitKind::paragraph: {
      std::size_t begin = 0;
      std::size_t line_start = 0;
      bool prev_blank = false;
      for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i < text.size() && text[i] != '\n') continue;
        const bool blank = is_blank(text.substr(line_start, i - line_start));
        if (blank && !prev_blank) {
          push_trimmed(text, begin, line_start, spans);
          begin = i;
        } else if (blank) {
          begin = i;
        }
        prev_blank = blank;
        line_start = i + 1;
      }
      push_trimmed(text, begin, text.size(), spans);
      break;
    }
    case UnitKind::passage: {
      passage_cfg.validate();
      const auto words = word_spans(text);
      const std::size_t step = passage_cfg.chunk_size_words - passage_cfg.overlap_words;
      for (std::size_t start = 0; start < words.size(); start += step) {
        const std::size_t end = std::min(start + passage_cfg.chunk_size_words, words.size());
        spans.push_back({words[start].start, words[end - 1].end});
        if (end == words.size()) break;
      }
      break;
    }
  }
  return spans;
}

nlohmann::json to_json(const DocumentRecord& doc) {
  return {{"doc_id", doc.doc_id},           {"source_path", doc.source_path},
          {"text", doc.text},               {"metadata", doc.metadata},
          {"content_hash", doc.content_hash}, {"ingested_at", doc.ingested_at}};
}

DocumentRecord document_from_json(const nlohmann::json& j) {
  DocumentRecord doc;
  doc.doc_id = j.at("doc_id").get<std::string>();
  doc.source_path = j.at("source_path").get<std::string>();
  doc.text = j.at("text").get<std::string>();
  doc.metadata = j.at("metadata").get<Metadata>();
  doc.content_hash = j.at("content_hash").get<std::string>();
  doc.ingested_at = j.at("ingested_at").get<std::string>();
  return doc;
}

nlohmann::json to_json(const Chunk& c) {
  return {{"doc_id", c.doc_id},         {"chunk_index", c.chunk_index}, {"text", c.text},
          {"start_word", c.start_word}, {"end_word", c.end_word},       {"start_char", c.start_char},
          {"end_char", c.end_char},     {"metadata", c.metadata}};
}

Chunk chunk_from_json(const nlohmann::json& j) {
  Chunk c;
  c.doc_id = j.at("doc_id").get<std::string>();
  c.chunk_index = j.at("chunk_index").get<std::uint32_t>();
  c.text = j.at("text").get<std::string>();
  c.start_word = j.at("start_word").get<std::size_t>();
  c.end_word = j.at("end_word").get<std::size_t>();
  c.start_char = j.value("start_char", std::size_t{0});
  c.end_char = j.value("end_char", std::size_t{0});
  c.metadata = j.at("metadata").get<Metadata>();
  return c;
}

namespace {

template <typename T>
void write_jsonl(const fs::path& path, std::span<const T> items) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + tmp.string());
    for (const auto& item : items) out << to_json(item).dump() << '\n';
    if (!out) throw Error("io", "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

template <typename F>
auto read_jsonl(const fs::path& path, F&& from_json) {
  std::vector<decltype(from_json(nlohmann::json{}))> items;
  std::ifstream in(path, std::ios::binary);
  if (!in) return items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      items.push_back(from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error("corrupt_file", path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return items;
}

}  // namespace

void write_documents_jsonl(const fs::path& path, std::span<const DocumentRecord> docs) { write_jsonl(path, docs); }

std::vector<DocumentRecord> read_documents_jsonl(const fs::path& path) {
  return read_jsonl(path, [](const nlohmann::json& j) { return document_from_json(j); });
}

void write_chunks_jsonl(const fs::path& path, std::span<const Chunk> chunks) { write_jsonl(path, chunks); }

std::vector<Chunk> read_chunks_jsonl(const fs::path& path) {
  return read_jsonl(path, [](const nlohmann::json& j) { return chunk_from_json(j); });
}

std::string utc_now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace docfoundry

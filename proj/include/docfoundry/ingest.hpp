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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "docfoundry/types.hpp"

namespace docfoundry {

/// Lower-case hex SHA-256 of `bytes` (64 characters).
std::string content_hash(std::string_view bytes);

struct DocumentRecord {
  std::string doc_id;
  std::string source_path;  // relative to the ingested root, '/' separated
  std::string text;
  Metadata metadata;
  std::string content_hash;
  std::string ingested_at;  // ISO-8601 UTC, e.g. 2026-01-31T12:00:00Z

  bool operator==(const DocumentRecord&) const = default;
};

/// Stable id derived from (source_path, content_hash): first 16 hex chars of
/// sha256(source_path '\0' content_hash).
std::string make_doc_id(std::string_view source_path, std::string_view hash);

struct Chunk {
  std::string doc_id;
  std::uint32_t chunk_index = 0;
  std::string text;
  std::size_t start_word = 0;  // inclusive
  std::size_t end_word = 0;    // exclusive
  std::size_t start_char = 0;  // span of `text` inside the document text
  std::size_t end_char = 0;
  Metadata metadata;

  ChunkRef ref() const { return ChunkRef{doc_id, chunk_index}; }
  bool operator==(const Chunk&) const = default;
};

enum class UnitKind { sentence, paragraph, passage };

UnitKind parse_unit_kind(std::string_view name);
std::string_view to_string(UnitKind unit);

struct ChunkingConfig {
  std::size_t chunk_size_words = 300;
  std::size_t overlap_words = 50;
  UnitKind unit = UnitKind::passage;

  /// Throws InvalidArgumentError unless 0 <= overlap < chunk_size.
  void validate() const;
};

/// Half-open character span [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
};

/// Maximal runs of non-whitespace, as character spans.
std::vector<Span> word_spans(std::string_view text);

/// Newline normalisation (CRLF/CR -> LF); HTML additionally gets tag stripping
/// and entity decoding.
std::string normalize_text(std::string_view raw, std::string_view extension);

/// Builds a record from raw file bytes. Throws InvalidArgumentError when the
/// normalised text is empty or whitespace-only.
DocumentRecord make_document(std::string source_path, std::string_view raw_bytes,
                             Metadata user_metadata = {}, std::string ingested_at = {});

struct LoadIssue {
  std::string source_path;
  std::string reason;
};

struct LoadResult {
  std::vector<DocumentRecord> documents;  // sorted by source_path
  std::vector<LoadIssue> issues;          // unreadable, rejected or unsupported files
};

/// File extensions load_directory() understands.
std::span<const std::string_view> supported_extensions();

/// Recursively loads supported files under `root`. When `include_globs` is
/// non-empty a file must match at least one glob (tested against both the
/// relative path and the file name). A sidecar `<file>.meta.json` holding a
/// flat string map is merged into the record's metadata.
/// Throws NotFoundError if `root` is missing or not a directory.
LoadResult load_directory(const std::filesystem::path& root,
                          const std::vector<std::string>& include_globs = {});

/// Sliding word windows of `chunk_size_words` advancing by
/// `chunk_size_words - overlap_words`; stops once a window reaches the end.
std::vector<Chunk> chunk_document(const DocumentRecord& doc, const ChunkingConfig& cfg);

/// Unit spans over `text`. Sentence and paragraph spans are trimmed of
/// surrounding whitespace; passage spans are chunk windows.
std::vector<Span> segment_units(std::string_view text, UnitKind unit,
                                const ChunkingConfig& passage_cfg = {});

// JSON-lines persistence. Field names match the struct members.
nlohmann::json to_json(const DocumentRecord& doc);
DocumentRecord document_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Chunk& chunk);
Chunk chunk_from_json(const nlohmann::json& j);

void write_documents_jsonl(const std::filesystem::path& path, std::span<const DocumentRecord> docs);
std::vector<DocumentRecord> read_documents_jsonl(const std::filesystem::path& path);
void write_chunks_jsonl(const std::filesystem::path& path, std::span<const Chunk> chunks);
std::vector<Chunk> read_chunks_jsonl(const std::filesystem::path& path);

/// Current time as ISO-8601 UTC.
std::string utc_now_iso8601();

}  // namespace docfoundry

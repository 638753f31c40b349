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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace docfoundry {

using Metadata = std::map<std::string, std::string>;

/// Identifies one chunk: the owning document plus the 0-based chunk index.
/// Ordering is (doc_id, chunk_index) and is the tie-break order for every ranked list.
struct ChunkRef {
  std::string doc_id;
  std::uint32_t chunk_index = 0;

  auto operator<=>(const ChunkRef&) const = default;
  bool operator==(const ChunkRef&) const = default;

  /// Rendered as "<doc_id>:<chunk_index>".
  std::string str() const { return doc_id + ":" + std::to_string(chunk_index); }

  /// Inverse of str(); throws std::invalid_argument on malformed input.
  static ChunkRef parse(std::string_view text);
};

/// Base for all library errors; `code()` is a stable machine string.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message) : Error("not_found", message) {}
};

class DuplicateError : public Error {
 public:
  explicit DuplicateError(const std::string& message) : Error("duplicate", message) {}
};

class InvalidArgumentError : public Error {
 public:
  explicit InvalidArgumentError(const std::string& message) : Error("invalid_argument", message) {}
};

class CorruptFileError : public Error {
 public:
  CorruptFileError(const std::string& message, std::size_t offset)
      : Error("corrupt_file", message + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class VersionMismatchError : public Error {
 public:
  explicit VersionMismatchError(const std::string& message) : Error("version_mismatch", message) {}
};

class EmptyIndexError : public Error {
 public:
  explicit EmptyIndexError(const std::string& message) : Error("empty_index", message) {}
};

inline ChunkRef ChunkRef::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw InvalidArgumentError("malformed chunk ref: " + std::string(text));
  }
  std::uint32_t index = 0;
  for (const char c : text.substr(colon + 1)) {
    if (c < '0' || c > '9') throw InvalidArgumentError("malformed chunk ref: " + std::string(text));
    index = index * 10 + static_cast<std::uint32_t>(c - '0');
  }
  return ChunkRef{std::string(text.substr(0, colon)), index};
}

}  // namespace docfoundry

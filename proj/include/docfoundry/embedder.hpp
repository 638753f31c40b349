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

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docfoundry/types.hpp"
#include "docfoundry/vector_ops.hpp"

namespace docfoundry {

using Embedding = Vector<float>;

/// Maps text to a unit-norm vector of fixed dimension (zero vector for blank
/// text). Implementations are deterministic and safe to call concurrently.
class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual std::size_t dim() const = 0;
  /// Stable description, persisted with indexes, e.g. "hashed-ngram:256:3:0".
  virtual std::string id() const = 0;
  virtual Embedding embed(std::string_view text) const = 0;
  virtual std::vector<Embedding> embed_batch(std::span<const std::string> texts) const;
};

class EmbedderError : public Error {
 public:
  explicit EmbedderError(const std::string& message) : Error("embedder", message) {}
};

/// Feature hashing of character n-grams.
///
/// Text is ASCII-lowercased, whitespace runs collapse to one space and the
/// result is trimmed and padded with one space on each side. Each byte n-gram
/// is hashed with 64-bit FNV-1a (offset basis XOR seed); bucket = hash % dim
/// receives +1. The count vector is L2-normalised.
class HashedNgramEmbedder final : public Embedder {
 public:
  explicit HashedNgramEmbedder(std::size_t dim = 256, std::size_t n = 3, std::uint64_t seed = 0);

  std::size_t dim() const override { return dim_; }
  std::size_t n() const { return n_; }
  std::uint64_t seed() const { return seed_; }
  std::string id() const override;
  Embedding embed(std::string_view text) const override;

 private:
  std::size_t dim_;
  std::size_t n_;
  std::uint64_t seed_;
};

/// Remote embedder: POST {"texts":[...]} -> {"vectors":[[...]]}. Returned
/// vectors are L2-normalised client-side and must have `dim` entries.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::string url, std::size_t dim, int timeout_s = 60);

  std::size_t dim() const override { return dim_; }
  std::string id() const override { return "http:" + url_ + ":" + std::to_string(dim_); }
  Embedding embed(std::string_view text) const override;
  std::vector<Embedding> embed_batch(std::span<const std::string> texts) const override;

 private:
  std::string url_;
  std::size_t dim_;
  int timeout_s_;
};

/// Builds an embedder from its id() string.
std::shared_ptr<const Embedder> make_embedder(std::string_view id);

}  // namespace docfoundry

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

#include "docfoundry/embedder.hpp"

#include <json.hpp>

#include "internal/http_util.hpp"

namespace docfoundry {

std::vector<Embedding> Embedder::embed_batch(std::span<const std::string> texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

HashedNgramEmbedder::HashedNgramEmbedder(std::size_t dim, std::size_t n, std::uint64_t seed)
    : dim_(dim), n_(n), seed_(seed) {
  if (dim_ == 0 || n_ == 0) throw InvalidArgumentError("hashed embedder needs positive dim and n");
}

std::string HashedNgramEmbedder::id() const {
  return "hashed-ngram:" + std::to_string(dim_) + ":" + std::to_string(n_) + ":" + std::to_string(seed_);
}

Embedding HashedNgramEmbedder::embed(std::string_view text) const {
  std::string norm;
  norm.reserve(text.size() + 2);
  bool pending_space = false;
  for (const char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending_space = !norm.empty();
      continue;
    }
    if (pending_space) norm += ' ';
    pending_space = false;
    norm += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  }
  Embedding v = Embedding::Zero(static_cast<Eigen::Index>(dim_));
  if (norm.empty()) return v;
  const std::string padded = " " + norm + " ";
  if (padded.size() < n_) return v;
  for (std::size_t i = 0; i + n_ <= padded.size(); ++i) {
    std::uint64_t h = 14695981039346656037ULL ^ seed_;
    for (std::size_t j = i; j < i + n_; ++j) {
      h ^= static_cast<unsigned char>(padded[j]);
      h *= 1099511628211ULL;
    }
    v[static_cast<Eigen::Index>(h % dim_)] += 1.0f;
  }
  return l2_normalized(v);
}

HttpEmbedder::HttpEmbedder(std::string url, std::size_t dim, int timeout_s)
    : url_(std::move(url)), dim_(dim), timeout_s_(timeout_s) {
  if (dim_ == 0) throw InvalidArgumentError("http embedder needs positive dim");
}

Embedding HttpEmbedder::embed(std::string_view text) const {
  const std::string t(text);
  return embed_batch(std::span<const std::string>(&t, 1)).front();
}

std::vector<Embedding> HttpEmbedder::embed_batch(std::span<const std::string> texts) const {
  if (texts.empty()) return {};
  const auto parts = detail::split_url(url_);
  httplib::Client client(parts.origin);
  client.set_connection_timeout(timeout_s_);
  client.set_read_timeout(timeout_s_);
  const nlohmann::json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  auto res = client.Post(parts.path.empty() ? "/" : parts.path, body.dump(), "application/json");
  if (!res) throw EmbedderError("embedding request to " + url_ + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw EmbedderError("embedding request to " + url_ + " returned HTTP " + std::to_string(res->status) + ": " +
                        res->body.substr(0, 200));
  }
  std::vector<Embedding> out;
  try {
    const auto j = nlohmann::json::parse(res->body);
    const auto& vectors = j.at("vectors");
    if (vectors.size() != texts.size()) throw EmbedderError("embedding response has wrong vector count");
    for (const auto& row : vectors) {
      if (row.size() != dim_) throw EmbedderError("embedding response has wrong dimension");
      Embedding v(static_cast<Eigen::Index>(dim_));
      for (std::size_t i = 0; i < dim_; ++i) v[static_cast<Eigen::Index>(i)] = row.at(i).get<float>();
      out.push_back(l2_normalized(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw EmbedderError(std::string("malformed embedding response: ") + e.what());
  }
  return out;
}

std::shared_ptr<const Embedder> make_embedder(std::string_view id) {
  if (id.starts_with("hashed-ngram")) {
    std::vector<std::uint64_t> nums;
    std::size_t pos = id.find(':');
    while (pos != std::string_view::npos) {
      const auto next = id.find(':', pos + 1);
      nums.push_back(std::stoull(std::string(id.substr(pos + 1, next - pos - 1))));
      pos = next;
    }
    const std::size_t dim = nums.size() > 0 ? nums[0] : 256;
    const std::size_t n = nums.size() > 1 ? nums[1] : 3;
    const std::uint64_t seed = nums.size() > 2 ? nums[2] : 0;
    return std::make_shared<HashedNgramEmbedder>(dim, n, seed);
  }
  if (id.starts_with("http:")) {
    const auto rest = id.substr(5);
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos) throw InvalidArgumentError("http embedder id needs ':<dim>'");
    return std::make_shared<HttpEmbedder>(std::string(rest.substr(0, colon)),
                                          std::stoul(std::string(rest.substr(colon + 1))));
  }
  throw InvalidArgumentError("unknown embedder: " + std::string(id));
}

}  // namespace docfoundry

// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgepipe/bytes.hpp"
#include "edgepipe/tensor.hpp"

namespace edgepipe {

// N x d corpus of F32 embeddings plus one text per row.
class VectorIndex {
 public:
  VectorIndex() = default;
  VectorIndex(std::size_t dim, std::vector<float> rows, std::vector<std::string> texts);

  std::size_t size() const noexcept { return texts_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const float> row(std::size_t i) const;
  const std::string& text(std::size_t i) const { return texts_.at(i); }
  const std::vector<float>& rows() const noexcept { return rows_; }
  Tensor matrix() const;

 private:
  std::size_t dim_ = 0;
  std::vector<float> rows_;
  std::vector<std::string> texts_;
};

struct SearchHit {
  std::size_t index = 0;
  double score = 0.0;
  std::string text;

  bool operator==(const SearchHit&) const = default;
};

// Raw dot-product scores, k best in descending order, lower index first on
// ties. Throws kInvalidArgument for k outside [1, N], kShapeMismatch for a
// query of the wrong length.
std::vector<SearchHit> vector_search(const VectorIndex& index, std::span<const float> query,
                                     std::size_t k);

// Deterministic bag-of-tokens embedding: each lowercase alphanumeric token
// maps to a seeded random unit vector; the sum is normalised. Text without
// tokens embeds to the zero vector.
inline constexpr std::uint64_t kEmbedSeed = 0x5eed'e111'beddULL;
std::vector<float> embed_text(std::string_view text, std::size_t dim,
                              std::uint64_t seed = kEmbedSeed);

VectorIndex build_index(const std::vector<std::string>& texts, std::size_t dim,
                        std::uint64_t seed = kEmbedSeed);

// Small built-in corpus so the search tool works without any files.
VectorIndex default_index(std::size_t dim = 32);

// Embedding file: "embdb <N> <d>" then N lines of
// "<base64 of d little-endian f32> \t <text>".
std::string format_embdb(const VectorIndex& index);
VectorIndex parse_embdb(std::string_view text);
VectorIndex load_embdb(const std::filesystem::path& path);
void save_embdb(const std::filesystem::path& path, const VectorIndex& index);

std::string base64_encode(std::span<const std::uint8_t> bytes);
Bytes base64_decode(std::string_view text);

// vector_search tool arguments: k u32 | query text (u32 length).
struct SearchArgs {
  std::uint32_t k = 1;
  std::string query;

  Bytes encode() const;
  static SearchArgs decode(std::span<const std::uint8_t> bytes);
};

// Result payload: count u32 | per hit (index u32 | score f64 | text u32-length).
Bytes encode_hits(const std::vector<SearchHit>& hits);
std::vector<SearchHit> decode_hits(std::span<const std::uint8_t> bytes);

}  // namespace edgepipe

/*
 * Copyright 2026 The sentinsert Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sentinsert/errors.hpp"
#include "sentinsert/graph.hpp"
#include "sentinsert/problem.hpp"

// Binary embedding file, all integers and floats little-endian:
//
//   "IGNE" | u32 version | u32 record count | u32 dim
//   per record: u16 id length | id bytes (UTF-8) | 6 * dim f32
//
// The six vectors are part1..part5 then the question. Empty parts are stored
// as zero vectors.
namespace sentinsert {

inline constexpr std::array<char, 4> kEmbeddingMagic = {'I', 'G', 'N', 'E'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kVectorsPerRecord = kPartCount + 1;

struct EmbeddingRecord {
  std::string id;
  std::array<std::vector<float>, kVectorsPerRecord> vectors;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

struct EmbeddingSet {
  std::uint32_t dim = 0;
  std::vector<EmbeddingRecord> records;
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xFF));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw TruncationError(std::string("embedding file truncated while reading ") + what);
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint16_t u16(const char* what) {
    const auto b = take(2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32(const char* what) {
    const auto b = take(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
  }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_embeddings(const EmbeddingSet& set) {
  std::vector<std::uint8_t> out(kEmbeddingMagic.begin(), kEmbeddingMagic.end());
  detail::put_u32(out, kEmbeddingVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(set.records.size()));
  detail::put_u32(out, set.dim);
  for (const auto& r : set.records) {
    if (r.id.size() > 0xFFFF) throw ValidationError("embedding id longer than 65535 bytes");
    detail::put_u16(out, static_cast<std::uint16_t>(r.id.size()));
    out.insert(out.end(), r.id.begin(), r.id.end());
    for (const auto& v : r.vectors) {
      if (v.size() != set.dim) {
        throw ShapeError("record " + r.id + ": vector length " + std::to_string(v.size()) +
                         " != dim " + std::to_string(set.dim));
      }
      for (float f : v) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

/// Decodes and validates. `expected_dim`, when given, must match the header.
inline EmbeddingSet decode_embeddings(std::span<const std::uint8_t> bytes,
                                      std::optional<std::uint32_t> expected_dim = std::nullopt) {
  detail::ByteReader in(bytes);
  const auto magic = in.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kEmbeddingMagic.begin())) {
    throw FormatError("bad embedding file magic");
  }
  const std::uint32_t version = in.u32("version");
  if (version != kEmbeddingVersion) {
    throw FormatError("unsupported embedding file version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32("record count");
  EmbeddingSet set;
  set.dim = in.u32("dim");
  if (expected_dim && *expected_dim != set.dim) {
    throw ConfigError("embedding dim " + std::to_string(set.dim) + " does not match configured dim " +
                      std::to_string(*expected_dim));
  }
  set.records.reserve(std::min<std::size_t>(count, in.remaining() / 2));
  for (std::uint32_t r = 0; r < count; ++r) {
    EmbeddingRecord rec;
    const std::uint16_t id_len = in.u16("id length");
    const auto id = in.take(id_len, "id");
    rec.id.assign(id.begin(), id.end());
    for (auto& v : rec.vectors) {
      v.resize(set.dim);
      for (float& f : v) {
        f = std::bit_cast<float>(in.u32("vector"));
        if (!std::isfinite(f)) throw FormatError("record " + rec.id + " contains a non-finite value");
      }
    }
    set.records.push_back(std::move(rec));
  }
  if (in.remaining() != 0) {
    throw TruncationError("embedding file has " + std::to_string(in.remaining()) +
                          " trailing bytes beyond the header-implied length");
  }
  return set;
}

inline void write_embeddings(const std::string& path, const EmbeddingSet& set) {
  const auto bytes = encode_embeddings(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write embedding file " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline EmbeddingSet read_embeddings(const std::string& path,
                                    std::optional<std::uint32_t> expected_dim = std::nullopt) {
  const auto bytes = read_file_bytes(path);
  return decode_embeddings(bytes, expected_dim);
}

/// Pairs problems with their embedding records by id, widening to double.
inline std::vector<EmbeddedProblem> attach_embeddings(std::span<const InsertionProblem> problems,
                                                      const EmbeddingSet& set) {
  std::unordered_map<std::string, const EmbeddingRecord*> by_id;
  for (const auto& r : set.records) by_id.emplace(r.id, &r);
  std::vector<EmbeddedProblem> out;
  out.reserve(problems.size());
  for (const auto& p : problems) {
    const auto it = by_id.find(p.id);
    if (it == by_id.end()) throw DataError("no embedding record for problem id '" + p.id + "'");
    EmbeddedProblem e;
    e.id = p.id;
    e.label = p.label;
    for (std::size_t i = 0; i < kPartCount; ++i)
      e.parts[i].assign(it->second->vectors[i].begin(), it->second->vectors[i].end());
    e.question.assign(it->second->vectors[kPartCount].begin(), it->second->vectors[kPartCount].end());
    out.push_back(std::move(e));
  }
  return out;
}

/// Narrows embedded problems to a writable set (used by tests and synthetic
/// data generation).
inline EmbeddingSet to_embedding_set(std::span<const EmbeddedProblem> problems) {
  EmbeddingSet set;
  if (!problems.empty()) set.dim = static_cast<std::uint32_t>(problems.front().dim());
  for (const auto& p : problems) {
    EmbeddingRecord r;
    r.id = p.id;
    for (std::size_t i = 0; i < kPartCount; ++i) r.vectors[i].assign(p.parts[i].begin(), p.parts[i].end());
    r.vectors[kPartCount].assign(p.question.begin(), p.question.end());
    set.records.push_back(std::move(r));
  }
  return set;
}

}  // namespace sentinsert

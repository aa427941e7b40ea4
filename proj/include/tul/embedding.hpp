#pragma once

// Dense embedding matrix and its file format.
//
// Binary format "TUEM" v1:
//   magic "TUEM", u32 version, u32 n, u32 k,
//   then n rows of k little-endian f64. Row i corresponds to dataset id i.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tul/common.hpp"

namespace tul {

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  const double* row(std::size_t i) const { return data.data() + i * cols; }
  double* row(std::size_t i) { return data.data() + i * cols; }

  void validate() const {
    if (data.size() != rows * cols)
      throw DataError("embedding matrix: storage size mismatch");
    for (double v : data)
      if (!std::isfinite(v))
        throw DataError("embedding matrix: non-finite entry");
  }
};

inline std::string serialize_embeddings(const EmbeddingMatrix& m) {
  m.validate();
  ByteWriter w;
  w.magic("TUEM");
  w.u32(kEmbeddingFormatVersion);
  w.u32(static_cast<std::uint32_t>(m.rows));
  w.u32(static_cast<std::uint32_t>(m.cols));
  for (double v : m.data) w.f64(v);
  return w.take();
}

inline EmbeddingMatrix deserialize_embeddings(std::string_view bytes) {
  ByteReader r(bytes);
  r.expect_magic("TUEM", "TUEM embedding");
  const std::uint32_t version = r.u32("version");
  if (version != kEmbeddingFormatVersion)
    throw ParseError("unsupported TUEM version " + std::to_string(version),
                     r.offset());
  EmbeddingMatrix m;
  m.rows = r.u32("row count");
  m.cols = r.u32("column count");
  m.data.resize(m.rows * m.cols);
  for (std::size_t i = 0; i < m.data.size(); ++i)
    m.data[i] = r.f64("embedding value");
  r.expect_end("TUEM");
  return m;
}

inline void save_embeddings(const EmbeddingMatrix& m, const std::string& path) {
  write_file(path, serialize_embeddings(m));
}

inline EmbeddingMatrix load_embeddings(const std::string& path) {
  return deserialize_embeddings(read_file(path));
}

}  // namespace tul

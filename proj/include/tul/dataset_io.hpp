#pragma once

// Dataset serialization.
//
// Binary format "TUDS" v1:
//   magic "TUDS", u32 version, u32 n, u32 d, u32 C,
//   then n records of (u64 id, u32 label, d little-endian f64).
//
// Text import: CSV with header `id,label,f0..f{d-1}`.

#include <charconv>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "tul/common.hpp"
#include "tul/dataset.hpp"

namespace tul {

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

inline std::string serialize_dataset(const Dataset& ds) {
  ds.validate();
  ByteWriter w;
  w.magic("TUDS");
  w.u32(kDatasetFormatVersion);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(static_cast<std::uint32_t>(ds.dim));
  w.u32(ds.num_classes);
  for (const Example& e : ds.examples) {
    w.u64(e.id);
    w.u32(e.label);
    for (double f : e.features) w.f64(f);
  }
  return w.take();
}

inline Dataset deserialize_dataset(std::string_view bytes,
                                   const std::string& name) {
  ByteReader r(bytes);
  r.expect_magic("TUDS", "TUDS dataset");
  const std::uint32_t version = r.u32("version");
  if (version != kDatasetFormatVersion)
    throw ParseError("unsupported TUDS version " + std::to_string(version),
                     r.offset());
  const std::uint32_t n = r.u32("example count");
  const std::uint32_t d = r.u32("feature dimension");
  const std::uint32_t c = r.u32("class count");

  Dataset ds;
  ds.name = name;
  ds.dim = d;
  ds.num_classes = c;
  ds.examples.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::string row = "record " + std::to_string(i);
    Example e;
    e.id = r.u64((row + " id").c_str());
    if (e.id != i)
      throw ParseError(row + " has id " + std::to_string(e.id) +
                           "; ids must be dense and in order",
                       r.offset());
    e.label = r.u32((row + " label").c_str());
    if (e.label >= c)
      throw ParseError(row + " label " + std::to_string(e.label) +
                           " out of range (C = " + std::to_string(c) + ")",
                       r.offset());
    e.features.resize(d);
    for (std::uint32_t j = 0; j < d; ++j)
      e.features[j] = r.f64((row + " feature " + std::to_string(j)).c_str());
    ds.examples.push_back(std::move(e));
  }
  r.expect_end("TUDS");
  ds.validate();
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  write_file(path, serialize_dataset(ds));
}

inline Dataset load_dataset(const std::string& path) {
  std::string stem = path;
  const auto slash = stem.find_last_of('/');
  if (slash != std::string::npos) stem = stem.substr(slash + 1);
  const auto dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  return deserialize_dataset(read_file(path), stem);
}

// ---------------------------------------------------------------------------
// CSV import. The class count is inferred as max(label)+1 unless an explicit
// count is passed.

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double_field(const std::string& s, std::size_t line_no,
                                 const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing chars");
    return v;
  } catch (const std::exception&) {
    throw DataError("csv line " + std::to_string(line_no) + ": bad " + what +
                    " '" + s + "'");
  }
}

inline std::uint64_t parse_u64_field(const std::string& s, std::size_t line_no,
                                     const std::string& what) {
  std::uint64_t v = 0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw DataError("csv line " + std::to_string(line_no) + ": bad " + what +
                    " '" + s + "'");
  return v;
}

}  // namespace detail

inline Dataset import_csv(const std::string& text, const std::string& name,
                          std::uint32_t num_classes = 0) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: empty input");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label")
    throw DataError("csv: header must be id,label,f0..f{d-1}");
  const std::size_t d = header.size() - 2;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[2 + j] != "f" + std::to_string(j))
      throw DataError("csv: feature column " + std::to_string(j) +
                      " must be named f" + std::to_string(j));
  }

  Dataset ds;
  ds.name = name;
  ds.dim = d;
  std::uint32_t max_label = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 2 + d)
      throw DataError("csv line " + std::to_string(line_no) + ": expected " +
                      std::to_string(2 + d) + " fields, got " +
                      std::to_string(fields.size()));
    Example e;
    e.id = detail::parse_u64_field(fields[0], line_no, "id");
    e.label = static_cast<std::uint32_t>(
        detail::parse_u64_field(fields[1], line_no, "label"));
    max_label = std::max(max_label, e.label);
    e.features.resize(d);
    for (std::size_t j = 0; j < d; ++j)
      e.features[j] = detail::parse_double_field(
          fields[2 + j], line_no, "feature f" + std::to_string(j));
    ds.examples.push_back(std::move(e));
  }
  ds.num_classes = num_classes != 0 ? num_classes : max_label + 1;
  ds.validate();
  return ds;
}

inline Dataset import_csv_file(const std::string& path,
                               std::uint32_t num_classes = 0) {
  std::string stem = path;
  const auto slash = stem.find_last_of('/');
  if (slash != std::string::npos) stem = stem.substr(slash + 1);
  const auto dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  return import_csv(read_file(path), stem, num_classes);
}

}  // namespace tul

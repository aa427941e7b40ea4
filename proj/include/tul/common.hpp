#pragma once

// Shared error types, little-endian byte helpers and stable hashing.
// Everything in this header is freestanding; the rest of the library builds
// on it.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tul {

// Precondition / configuration violations. The CLI maps these to exit code 2.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data. The CLI maps these to exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parse failure in a binary or text stream; carries the byte offset.
class ParseError : public DataError {
 public:
  ParseError(const std::string& msg, std::size_t offset)
      : DataError(msg + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Non-finite loss during an optimization run. The CLI maps these to exit
// code 4.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(int epoch, int batch)
      : std::runtime_error("training diverged at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}
  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

// Synthetic benchmark generation could not satisfy its geometric constraints.
class GenerationError : public DataError {
 public:
  using DataError::DataError;
};

// ---------------------------------------------------------------------------
// Little-endian serialization. File formats are pinned to little-endian
// 64-bit floats regardless of host order.

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(char((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(char((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    buf_.append(static_cast<const char*>(p), n);
  }
  void magic(std::string_view m) { buf_.append(m); }

  const std::string& str() const noexcept { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= std::uint32_t(std::uint8_t(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= std::uint64_t(std::uint8_t(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  void expect_magic(std::string_view m, const char* format_name) {
    need(m.size(), format_name);
    if (data_.substr(pos_, m.size()) != m)
      throw ParseError(std::string("bad magic, not a ") + format_name +
                           " file",
                       pos_);
    pos_ += m.size();
  }

  bool at_end() const noexcept { return pos_ == data_.size(); }
  std::size_t offset() const noexcept { return pos_; }

  void expect_end(const char* format_name) {
    if (!at_end())
      throw ParseError(std::string("trailing bytes after ") + format_name +
                           " payload",
                       pos_);
  }

 private:
  void need(std::size_t n, const char* what) {
    if (data_.size() - pos_ < n)
      throw ParseError(std::string("unexpected end of data reading ") + what,
                       pos_);
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// FNV-1a 64-bit hash. Used for config hashes and input manifests.

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

// Shortest exact decimal form of a double (17 significant digits).
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Whole-file I/O.

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for reading: " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("read failure: " + path);
  return content;
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("write failure: " + path);
}

}  // namespace tul

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "tgformer/common.hpp"

namespace tgf::detail {

// Streams bytes to a file while accumulating a CRC-32; finish_crc() appends
// the checksum as the final 4 bytes.
class CrcWriter {
 public:
  explicit CrcWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw ValidationError("cannot write '" + path + "'");
  }
  void write(const void* data, std::size_t bytes) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    crc_ = crc32(crc_, static_cast<const Bytef*>(data), static_cast<uInt>(bytes));
  }
  template <class T>
  void write_value(T v) {
    write(&v, sizeof(v));
  }
  template <class T>
  void write_array(const std::vector<T>& v) {
    write(v.data(), v.size() * sizeof(T));
  }
  void write_string(const std::string& s) {
    write_value<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    write(s.data(), s.size());
  }
  void finish_crc() {
    const auto c = static_cast<std::uint32_t>(crc_);
    out_.write(reinterpret_cast<const char*>(&c), sizeof(c));
    if (!out_) throw ValidationError("write failed");
  }

 private:
  std::ofstream out_;
  uLong crc_ = crc32(0L, Z_NULL, 0);
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> buf) : buf_(std::move(buf)) {}
  void read(void* dst, std::size_t bytes) {
    if (pos_ + bytes > buf_.size()) throw FormatError("truncated container");
    std::memcpy(dst, buf_.data() + pos_, bytes);
    pos_ += bytes;
  }
  template <class T>
  T read_value() {
    T v;
    read(&v, sizeof(v));
    return v;
  }
  template <class T>
  void read_array(std::vector<T>& v, std::size_t count) {
    v.resize(count);
    read(v.data(), count * sizeof(T));
  }
  std::string read_string() {
    const auto n = read_value<std::uint32_t>();
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

// Reads the whole file, verifies and strips the trailing CRC-32.
inline ByteReader open_checked(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<char> buf(static_cast<std::size_t>(size));
  in.read(buf.data(), size);
  if (!in) throw FormatError("read failed for '" + path + "'");
  if (buf.size() < 4) throw FormatError("container too small");

  std::uint32_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 4, 4);
  const uLong computed = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(buf.data()),
                               static_cast<uInt>(buf.size() - 4));
  if (static_cast<std::uint32_t>(computed) != stored) throw FormatError("checksum mismatch");
  buf.resize(buf.size() - 4);
  return ByteReader(std::move(buf));
}

}  // namespace tgf::detail

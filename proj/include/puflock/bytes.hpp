#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "puflock/errors.hpp"

namespace puflock::detail {

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw ParseError(path + ": read failed");
  return bytes;
}

inline void write_file(const std::string& path,
                       const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError(path + ": cannot open file for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ParseError(path + ": write failed");
}

/// Little-endian byte serializer (big-endian only where a format demands it).
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }

  void u16le(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }

  void u32le(std::uint32_t v) {
    u16le(static_cast<std::uint16_t>(v));
    u16le(static_cast<std::uint16_t>(v >> 16));
  }

  void u64le(std::uint64_t v) {
    u32le(static_cast<std::uint32_t>(v));
    u32le(static_cast<std::uint32_t>(v >> 32));
  }

  /// Bit pattern of a binary32 value; NaN payloads survive.
  void f32le(float v) { u32le(std::bit_cast<std::uint32_t>(v)); }

  void u32be(std::uint32_t v) {
    u8(static_cast<std::uint8_t>(v >> 24));
    u8(static_cast<std::uint8_t>(v >> 16));
    u8(static_cast<std::uint8_t>(v >> 8));
    u8(static_cast<std::uint8_t>(v));
  }

  void bytes(const std::uint8_t* data, std::size_t n) {
    buf_.insert(buf_.end(), data, data + n);
  }

  const std::vector<std::uint8_t>& buffer() const { return buf_; }

  void save(const std::string& path) const { write_file(path, buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Cursor over a byte buffer; every failure reports the byte offset.
class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  /// Extra label folded into error messages (e.g. "layer 3").
  void set_section(std::string section) { section_ = std::move(section); }

  [[noreturn]] void fail(const std::string& what) const {
    std::string msg = context_;
    if (!section_.empty()) msg += ": " + section_;
    msg += ": " + what + " at offset " + std::to_string(pos_);
    throw ParseError(msg);
  }

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }

  std::uint16_t u16le() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(
        bytes_[pos_] | (static_cast<std::uint16_t>(bytes_[pos_ + 1]) << 8));
    pos_ += 2;
    return v;
  }

  std::uint32_t u32le() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }

  std::uint64_t u64le() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 8;
    return v;
  }

  float f32le() { return std::bit_cast<float>(u32le()); }

  std::uint32_t u32be() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }

  const std::uint8_t* raw(std::size_t n) {
    need(n);
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  void expect_end() {
    if (!at_end()) fail(std::to_string(remaining()) + " trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      std::string msg = context_;
      if (!section_.empty()) msg += ": " + section_;
      msg += ": truncated at offset " + std::to_string(pos_) + ": need " +
             std::to_string(n) + " bytes, have " +
             std::to_string(bytes_.size() - pos_);
      throw ParseError(msg);
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
  std::string context_;
  std::string section_;
};

}  // namespace puflock::detail

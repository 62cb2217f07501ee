#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "longsteer/error.hpp"

namespace longsteer::bin {

// Little-endian encoder over a growable byte buffer.
class Writer {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f32s(std::span<const float> v) {
    for (float x : v) f32(x);
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

// Bounds-checked decoder; any overrun throws Error(code, ...).
class Reader {
 public:
  Reader(std::string_view data, Errc code) : data_(data), code_(code) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
  std::uint32_t u32() {
    const auto b = bytes(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
    return v;
  }
  std::uint64_t u64() {
    const auto b = bytes(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[static_cast<std::size_t>(i)]);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::vector<float> f32s(std::size_t n) {
    need(n * 4);
    std::vector<float> v(n);
    for (auto& x : v) x = f32();
    return v;
  }
  std::string str() {
    const auto n = u32();
    return std::string(bytes(n));
  }
  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw Error(code_, "unexpected end of data");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  Errc code_;
};

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary file and renames, so readers never see a
// partial artifact.
void write_file(const std::filesystem::path& path, std::string_view data);

}  // namespace longsteer::bin

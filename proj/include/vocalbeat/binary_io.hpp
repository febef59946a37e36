#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <type_traits>

#include "vocalbeat/error.hpp"

namespace vocalbeat::binary {

template <typename T>
T byteswap(T value) noexcept {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

template <typename T>
T to_little(T value) noexcept {
  if constexpr (std::endian::native == std::endian::little) return value;
  else return byteswap(value);
}

template <typename T>
T from_little(T value) noexcept {
  return to_little(value);
}

// Little-endian sequential writer over an ofstream.
class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open for writing: " + path);
  }

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write failed: " + path_);
  }

  template <typename T>
  void put(T value) {
    value = to_little(value);
    bytes(&value, sizeof(T));
  }

  template <typename T>
  void put_array(std::span<const T> values) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(values.data(), values.size_bytes());
    } else {
      for (T v : values) put(v);
    }
  }

  void close() {
    out_.close();
    if (!out_) throw IoError("close failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

// Little-endian sequential reader; short reads raise TruncatedFile.
class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open for reading: " + path);
  }

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw TruncatedFile("unexpected end of file: " + path_);
  }

  template <typename T>
  T get() {
    T value;
    bytes(&value, sizeof(T));
    return from_little(value);
  }

  template <typename T>
  void get_array(std::span<T> values) {
    bytes(values.data(), values.size_bytes());
    if constexpr (std::endian::native != std::endian::little)
      for (T& v : values) v = from_little(v);
  }

  bool at_eof() {
    return in_.peek() == std::char_traits<char>::eof();
  }

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace vocalbeat::binary

#pragma once

// Little-endian byte packing shared by the checkpoint and trial-file codecs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "factoreeg/error.hpp"

namespace factoreeg::detail {

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }
}

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    value = to_little(value);
    const auto* p = reinterpret_cast<const char*>(&value);
    buffer_.append(p, sizeof(T));
  }

  void put_bytes(std::string_view bytes) { buffer_.append(bytes); }

  const std::string& bytes() const noexcept { return buffer_; }

  void write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    if (!out) throw DataError("write failed for " + path.string());
  }

 private:
  std::string buffer_;
};

class ByteReader {
 public:
  ByteReader(std::string bytes, std::string source)
      : bytes_(std::move(bytes)), source_(std::move(source)) {}

  static ByteReader from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ByteReader(std::move(bytes), path.string());
  }

  template <typename T>
  T get() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + offset_, sizeof(T));
    offset_ += sizeof(T);
    return to_little(value);
  }

  std::string get_bytes(std::size_t n) {
    require(n);
    std::string out = bytes_.substr(offset_, n);
    offset_ += n;
    return out;
  }

  std::size_t offset() const noexcept { return offset_; }
  std::size_t remaining() const noexcept { return bytes_.size() - offset_; }
  const std::string& source() const noexcept { return source_; }

 private:
  void require(std::size_t n) const {
    if (offset_ + n > bytes_.size()) {
      throw TruncatedFileError(source_ + ": expected " + std::to_string(n) + " more bytes",
                               bytes_.size());
    }
  }

  std::string bytes_;
  std::string source_;
  std::size_t offset_ = 0;
};

}  // namespace factoreeg::detail

#pragma once

// Little-endian byte helpers shared by the on-disk formats.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "anfm/errors.hpp"

namespace anfm::detail {

template <typename T>
void put(std::string& out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * b)) & 0xff));
}

inline void put_f64(std::string& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  put<std::uint64_t>(out, bits);
}

class Reader {
 public:
  Reader(std::string_view bytes, std::string format) : bytes_(bytes), format_(std::move(format)) {}

  template <typename T>
  T get(DataError::Kind kind, const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) throw DataError(kind, format_ + ": truncated " + what);
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  double get_f64(DataError::Kind kind, const char* what) {
    const auto bits = get<std::uint64_t>(kind, what);
    double x;
    std::memcpy(&x, &bits, sizeof x);
    return x;
  }

  std::string_view bytes(std::size_t len, DataError::Kind kind, const char* what) {
    if (bytes_.size() - pos_ < len) throw DataError(kind, format_ + ": truncated " + what);
    auto s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::string format_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataError::Kind::kIo, "cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(DataError::Kind::kIo, "write failed for '" + path + "'");
}

}  // namespace anfm::detail

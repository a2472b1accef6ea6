#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "addidec/errors.hpp"

namespace addidec {

// Little-endian binary IO with CRC tracking. Serialization is explicit about
// byte order so files are portable regardless of host.

class Crc32 {
 public:
  void update(const void* p, std::size_t n) {
    crc_ = ::crc32(crc_, static_cast<const Bytef*>(p), static_cast<uInt>(n));
  }
  std::uint32_t value() const { return static_cast<std::uint32_t>(crc_); }

 private:
  uLong crc_ = ::crc32(0L, nullptr, 0);
};

class BinWriter {
 public:
  explicit BinWriter(const std::string& path) : path_(path) {
    f_ = std::fopen(path.c_str(), "wb");
    if (!f_) throw DataError("cannot open for writing: " + path);
  }
  ~BinWriter() {
    if (f_) std::fclose(f_);
  }
  BinWriter(const BinWriter&) = delete;
  BinWriter& operator=(const BinWriter&) = delete;

  void bytes(const void* p, std::size_t n, Crc32* crc = nullptr) {
    if (std::fwrite(p, 1, n, f_) != n) throw DataError("short write: " + path_);
    if (crc) crc->update(p, n);
  }
  void u8(std::uint8_t v, Crc32* c = nullptr) { le(v, c); }
  void u32(std::uint32_t v, Crc32* c = nullptr) { le(v, c); }
  void u64(std::uint64_t v, Crc32* c = nullptr) { le(v, c); }
  void f64(double v, Crc32* c = nullptr) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    le(bits, c);
  }
  void f32v(const std::vector<float>& v, Crc32* c = nullptr) {
    for (float x : v) {
      std::uint32_t bits;
      std::memcpy(&bits, &x, 4);
      le(bits, c);
    }
  }
  void f64v(const std::vector<double>& v, Crc32* c = nullptr) {
    for (double x : v) f64(x, c);
  }
  void close() {
    if (f_) {
      if (std::fclose(f_) != 0) throw DataError("close failed: " + path_);
      f_ = nullptr;
    }
  }

 private:
  template <typename T>
  void le(T v, Crc32* crc) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
      buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    bytes(buf, sizeof(T), crc);
  }
  std::string path_;
  std::FILE* f_ = nullptr;
};

class BinReader {
 public:
  explicit BinReader(const std::string& path) : path_(path) {
    f_ = std::fopen(path.c_str(), "rb");
    if (!f_) throw DataError("cannot open for reading: " + path);
  }
  ~BinReader() {
    if (f_) std::fclose(f_);
  }
  BinReader(const BinReader&) = delete;
  BinReader& operator=(const BinReader&) = delete;

  void bytes(void* p, std::size_t n, Crc32* crc = nullptr) {
    if (std::fread(p, 1, n, f_) != n)
      throw TruncationError("file shorter than header promises: " + path_);
    if (crc) crc->update(p, n);
  }
  std::uint8_t u8(Crc32* c = nullptr) { return le<std::uint8_t>(c); }
  std::uint32_t u32(Crc32* c = nullptr) { return le<std::uint32_t>(c); }
  std::uint64_t u64(Crc32* c = nullptr) { return le<std::uint64_t>(c); }
  double f64(Crc32* c = nullptr) {
    std::uint64_t bits = le<std::uint64_t>(c);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void f32v(std::vector<float>& v, std::size_t n, Crc32* c = nullptr) {
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = le<std::uint32_t>(c);
      std::memcpy(&v[i], &bits, 4);
    }
  }
  void f64v(std::vector<double>& v, std::size_t n, Crc32* c = nullptr) {
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = f64(c);
  }

 private:
  template <typename T>
  T le(Crc32* crc) {
    unsigned char buf[sizeof(T)];
    bytes(buf, sizeof(T), crc);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v = static_cast<T>(v | (static_cast<std::uint64_t>(buf[i]) << (8 * i)));
    return v;
  }
  std::string path_;
  std::FILE* f_ = nullptr;
};

// FNV-1a over a canonical string; used for config hashes embedded in reports
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace addidec

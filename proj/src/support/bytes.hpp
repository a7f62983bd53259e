#ifndef PVM_SUPPORT_BYTES_HPP
#define PVM_SUPPORT_BYTES_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "support/error.hpp"

namespace pvm {

using Bytes = std::vector<uint8_t>;
using ByteView = std::span<const uint8_t>;
using Digest32 = std::array<uint8_t, 32>;
using Key32 = std::array<uint8_t, 32>;

// All on-disk and on-wire integers are little-endian, regardless of host.

class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) { le(v, 2); }
  void u32(uint32_t v) { le(v, 4); }
  void u64(uint64_t v) { le(v, 8); }
  void i64(int64_t v) { le(static_cast<uint64_t>(v), 8); }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    le(bits, 8);
  }
  void raw(ByteView data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
  void raw(const void* data, size_t n) {
    const auto* p = static_cast<const uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(reinterpret_cast<const uint8_t*>(s.data()), s.size());
  }

  Bytes take() { return std::move(buf_); }
  const Bytes& data() const { return buf_; }
  size_t size() const { return buf_.size(); }

 private:
  void le(uint64_t v, int n) {
    for (int i = 0; i < n; i++) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(ByteView data,
                      pvm_status short_error = PVM_ERR_TRUNCATED_BLOB)
      : data_(data), short_error_(short_error) {}

  uint8_t u8() { return take(1)[0]; }
  uint16_t u16() { return static_cast<uint16_t>(le(2)); }
  uint32_t u32() { return static_cast<uint32_t>(le(4)); }
  uint64_t u64() { return le(8); }
  int64_t i64() { return static_cast<int64_t>(le(8)); }
  double f64() {
    uint64_t bits = le(8);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  ByteView raw(size_t n) { return take(n); }
  void raw_into(void* dst, size_t n) {
    ByteView v = take(n);
    std::memcpy(dst, v.data(), n);
  }
  template <size_t N>
  std::array<uint8_t, N> arr() {
    std::array<uint8_t, N> out;
    raw_into(out.data(), N);
    return out;
  }
  std::string str() {
    uint32_t n = u32();
    ByteView v = take(n);
    return std::string(reinterpret_cast<const char*>(v.data()), v.size());
  }

  size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }
  void expect_done() const {
    if (!done()) fail(short_error_, "trailing bytes after structure");
  }

 private:
  ByteView take(size_t n) {
    if (remaining() < n) fail(short_error_, "input ends mid-field");
    ByteView v = data_.subspan(pos_, n);
    pos_ += n;
    return v;
  }
  uint64_t le(int n) {
    ByteView v = take(static_cast<size_t>(n));
    uint64_t out = 0;
    for (int i = 0; i < n; i++) out |= static_cast<uint64_t>(v[i]) << (8 * i);
    return out;
  }

  ByteView data_;
  size_t pos_ = 0;
  pvm_status short_error_;
};

std::string to_hex(ByteView data);
Bytes from_hex(const std::string& hex);  // throws Usage on bad input

template <size_t N>
std::array<uint8_t, N> array_from_hex(const std::string& hex) {
  Bytes b = from_hex(hex);
  if (b.size() != N) fail(PVM_ERR_USAGE, "expected " + std::to_string(N) + "-byte hex value");
  std::array<uint8_t, N> out;
  std::memcpy(out.data(), b.data(), N);
  return out;
}

// splitmix64: the project-wide deterministic generator for fixtures and
// synthetic data. Stable across platforms, unlike std distributions.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}
  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  // Uniform in [0, bound).
  uint64_t below(uint64_t bound) { return bound ? next() % bound : 0; }
  // Uniform in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  uint64_t state_;
};

}  // namespace pvm

#endif

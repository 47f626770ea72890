// Copyright 2026 The EmLog Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EMLOG_BYTES_HPP
#define EMLOG_BYTES_HPP

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace emlog {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Overwrites memory in a way the optimizer may not elide.
void secure_wipe(void* p, std::size_t n) noexcept;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline std::string_view as_chars(ByteView b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

std::string to_hex(ByteView b);
Bytes from_hex(std::string_view hex);  // throws parse_error

/// Fixed-size secret key material. Move-only; wiped on destruction and on
/// move-out so stale copies never linger in freed memory.
template <std::size_t N>
class Secret {
 public:
  static constexpr std::size_t size_bytes = N;

  Secret() { data_.fill(0); }
  explicit Secret(ByteView src) {
    if (src.size() != N) fail(Errc::invalid_parameter, "secret has wrong length");
    std::copy(src.begin(), src.end(), data_.begin());
  }
  Secret(const Secret&) = delete;
  Secret& operator=(const Secret&) = delete;
  Secret(Secret&& o) noexcept : data_(o.data_) { o.wipe(); }
  Secret& operator=(Secret&& o) noexcept {
    if (this != &o) {
      data_ = o.data_;
      o.wipe();
    }
    return *this;
  }
  ~Secret() { wipe(); }

  Secret clone() const { return Secret(view()); }

  void wipe() noexcept { secure_wipe(data_.data(), N); }
  bool is_zero() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](std::uint8_t b) { return b == 0; });
  }

  ByteView view() const { return {data_.data(), N}; }
  std::uint8_t* data() { return data_.data(); }
  const std::uint8_t* data() const { return data_.data(); }

  friend bool operator==(const Secret& a, const Secret& b) { return a.data_ == b.data_; }

 private:
  std::array<std::uint8_t, N> data_;
};

using Key32 = Secret<32>;

/// Growable byte buffer that is wiped when it goes away.
class SecretBuffer {
 public:
  SecretBuffer() = default;
  explicit SecretBuffer(std::size_t n) : data_(n, 0) {}
  SecretBuffer(const SecretBuffer&) = delete;
  SecretBuffer& operator=(const SecretBuffer&) = delete;
  SecretBuffer(SecretBuffer&& o) noexcept : data_(std::move(o.data_)) { o.data_.clear(); }
  SecretBuffer& operator=(SecretBuffer&& o) noexcept {
    if (this != &o) {
      wipe();
      data_ = std::move(o.data_);
      o.data_.clear();
    }
    return *this;
  }
  ~SecretBuffer() { wipe(); }

  void wipe() noexcept { secure_wipe(data_.data(), data_.size()); }
  std::size_t size() const { return data_.size(); }
  std::uint8_t* data() { return data_.data(); }
  const std::uint8_t* data() const { return data_.data(); }
  ByteView view() const { return data_; }

  // Grows through a fresh allocation so no unwiped copy is left behind.
  void append(ByteView b) {
    Bytes next(data_.size() + b.size());
    std::copy(data_.begin(), data_.end(), next.begin());
    std::copy(b.begin(), b.end(), next.begin() + static_cast<std::ptrdiff_t>(data_.size()));
    wipe();
    data_ = std::move(next);
  }

 private:
  Bytes data_;
};

// Big-endian helpers shared by every wire and file format.
inline void put_be16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}
inline void put_be32(Bytes& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}
inline void put_be64(Bytes& out, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}
inline void put_bytes(Bytes& out, ByteView b) { out.insert(out.end(), b.begin(), b.end()); }

inline std::array<std::uint8_t, 4> be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
          static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

/// Bounds-checked cursor over an encoded buffer. Every overrun is a parse_error.
class Reader {
 public:
  explicit Reader(ByteView buf) : buf_(buf) {}

  std::size_t remaining() const { return buf_.size() - pos_; }
  bool done() const { return pos_ == buf_.size(); }

  ByteView take(std::size_t n) {
    if (remaining() < n) fail(Errc::parse_error, "truncated input");
    ByteView out = buf_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t be16() {
    auto b = take(2);
    return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  }
  std::uint32_t be32() {
    auto b = take(4);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
           (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
  }
  std::uint64_t be64() {
    std::uint64_t hi = be32();
    return (hi << 32) | be32();
  }
  Bytes bytes(std::size_t n) {
    auto v = take(n);
    return {v.begin(), v.end()};
  }
  // BE32 length prefix followed by that many bytes.
  Bytes lp_bytes(std::size_t max = 1u << 24) {
    std::uint32_t n = be32();
    if (n > max) fail(Errc::parse_error, "length prefix too large");
    return bytes(n);
  }
  void expect_done() const {
    if (!done()) fail(Errc::parse_error, "trailing bytes");
  }

 private:
  ByteView buf_;
  std::size_t pos_ = 0;
};

inline void put_lp_bytes(Bytes& out, ByteView b) {
  put_be32(out, static_cast<std::uint32_t>(b.size()));
  put_bytes(out, b);
}

}  // namespace emlog

#endif  // EMLOG_BYTES_HPP

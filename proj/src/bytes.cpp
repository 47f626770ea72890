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

#include "bytes.hpp"

#include <openssl/crypto.h>

namespace emlog {

void secure_wipe(void* p, std::size_t n) noexcept {
  if (p != nullptr && n > 0) OPENSSL_cleanse(p, n);
}

std::string to_hex(ByteView b) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(b.size() * 2);
  for (std::uint8_t v : b) {
    out.push_back(kHex[v >> 4]);
    out.push_back(kHex[v & 0xF]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  auto nibble = [](char ch) -> int {
    if (ch >= '0' && ch <= '9') return ch - '0';
    if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
    if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) fail(Errc::parse_error, "hex string has odd length");
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = nibble(hex[i]);
    int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) fail(Errc::parse_error, "invalid hex digit");
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ok: return "ok";
    case Errc::invalid_parameter: return "invalid-parameter";
    case Errc::key_unavailable: return "key-unavailable";
    case Errc::block_full: return "block-full";
    case Errc::key_misuse: return "key-misuse";
    case Errc::parse_error: return "parse-error";
    case Errc::auth_failure: return "auth-failure";
    case Errc::io_error: return "io-error";
    case Errc::already_exists: return "already-exists";
    case Errc::negotiation_failure: return "negotiation-failure";
    case Errc::replay_detected: return "replay-detected";
    case Errc::integrity_alarm: return "integrity-alarm";
    case Errc::crypto_failure: return "crypto-failure";
    case Errc::not_found: return "not-found";
  }
  return "unknown";
}

}  // namespace emlog

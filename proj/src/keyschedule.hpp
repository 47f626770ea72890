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

// Hierarchical forward-integrity key schedule.
//
//   RLK --HKDF("IK"||g)--> IK(g)                      position addressed
//   IK(g) --HKDF("BK0"||b)--> bK(b)                   b = g*c
//   bK(b-1) --HKDF("BK"||b)--> bK(b)                  b inside the group
//   bK(b) --HKDF("MK"||b||0)--> k(b,0)
//   k(b,i-1) --HKDF("MK"||b||i)--> k(b,i)             i < m
//
// Every derivation is HKDF-SHA256 with the fixed 32-byte salt kSchemeSalt and
// a 32-byte output. All indices are big-endian 32-bit. The chained steps
// consume (wipe) the predecessor key, so a holder of bK(b) or k(b,i) can only
// move forward, and only until the end of its group.

#ifndef EMLOG_KEYSCHEDULE_HPP
#define EMLOG_KEYSCHEDULE_HPP

#include <array>
#include <cstdint>

#include "bytes.hpp"

namespace emlog {

// SHA-256("emlog/v1/kdf-salt").
inline constexpr std::array<std::uint8_t, 32> kSchemeSalt = {
    0x5d, 0x44, 0xb2, 0xbf, 0x80, 0x0a, 0xdf, 0x0b, 0x8d, 0xaf, 0xba, 0xf5, 0x37, 0xcf, 0xbd, 0xde,
    0xf7, 0x6e, 0xee, 0x15, 0x99, 0x26, 0xa7, 0x66, 0x97, 0x44, 0x95, 0x19, 0x91, 0xe4, 0x3b, 0xea};

inline constexpr std::size_t kHkdfMaxOutput = 255 * 32;

/// RFC 5869 HKDF with SHA-256. An empty salt means HashLen zero bytes.
/// Throws invalid_parameter when out_len > 255 * 32.
SecretBuffer hkdf(ByteView ikm, ByteView salt, ByteView info, std::size_t out_len);

/// 32-byte HKDF output written straight into a key, no heap allocation.
void hkdf32(ByteView ikm, ByteView salt, ByteView info, Key32& out);

struct ChainParams {
  std::uint32_t c = 1;  // blocks per group
  std::uint32_t m = 1;  // records per block

  // Throws invalid_parameter when c or m is zero.
  static ChainParams make(std::uint32_t c, std::uint32_t m);

  std::uint32_t group_of(std::uint32_t block_id) const { return block_id / c; }
  std::uint64_t first_block_of(std::uint32_t group_id) const {
    return static_cast<std::uint64_t>(group_id) * c;
  }
  bool starts_group(std::uint32_t block_id) const { return block_id % c == 0; }

  friend bool operator==(const ChainParams&, const ChainParams&) = default;
};

class RootLoggingKey {
 public:
  static RootLoggingKey generate();
  explicit RootLoggingKey(ByteView material) : key_(material) {}

  // Throws key_unavailable once destroyed.
  const Key32& key() const;
  void destroy() noexcept {
    key_.wipe();
    destroyed_ = true;
  }
  bool destroyed() const noexcept { return destroyed_; }

 private:
  Key32 key_;
  bool destroyed_ = false;
};

struct IntermediateKey {
  std::uint32_t group_id = 0;
  Key32 key;

  IntermediateKey clone() const { return {group_id, key.clone()}; }
};

struct BlockKey {
  std::uint32_t block_id = 0;
  Key32 key;

  BlockKey clone() const { return {block_id, key.clone()}; }
};

struct MessageKey {
  std::uint32_t block_id = 0;
  std::uint32_t msg_id = 0;
  Key32 key;

  MessageKey clone() const { return {block_id, msg_id, key.clone()}; }
};

IntermediateKey derive_ik(const RootLoggingKey& rlk, std::uint32_t group_id);

// block_id must be the first block of ik's group.
BlockKey first_block_key(const IntermediateKey& ik, std::uint32_t block_id, const ChainParams& params);

// Consumes prev: after a successful call its key buffer reads as zeros.
// Crossing a group boundary or skipping an id is invalid_parameter.
BlockKey next_block_key(BlockKey& prev, std::uint32_t block_id, const ChainParams& params);

MessageKey first_message_key(const BlockKey& bk);

// Consumes prev. Throws block_full when prev.msg_id + 1 >= m.
MessageKey next_message_key(MessageKey& prev, const ChainParams& params);

// Verifier-side re-derivation by coordinate.
BlockKey derive_block_key(const IntermediateKey& ik, const ChainParams& params, std::uint32_t block_id);
BlockKey derive_block_key(const RootLoggingKey& rlk, const ChainParams& params, std::uint32_t block_id);
MessageKey derive_message_key(const BlockKey& bk, const ChainParams& params, std::uint32_t msg_id);

}  // namespace emlog

#endif  // EMLOG_KEYSCHEDULE_HPP

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

// Two-dimensional signed log structure: HMAC-tagged fixed-layout records
// grouped into ECDSA-signed blocks, and the verifiers that check them.
//
// Record (292 bytes):  BE32 msg_id | tag[32] | text[256]
// Text field:          BE16 prefix | payload (<= 254) | zero padding
//   prefix bits 0..11  used length
//   prefix bit  12     continuation (entry continues in the next record)
//   prefix bits 13..15 reserved, must be zero
// Tag:                 HMAC-SHA256(k(b,i), BE32 b | BE32 i | text[256])
// Block:               "EMLB" | ver | BE32 block_id | BE32 count | records | sig[64]
// Signed preimage:     BE32 block_id | BE32 count | tag_0 | ... | tag_{n-1}

#ifndef EMLOG_LOGCHAIN_HPP
#define EMLOG_LOGCHAIN_HPP

#include <optional>
#include <string>
#include <vector>

#include "chainstate.hpp"
#include "crypto.hpp"
#include "identity.hpp"
#include "keyschedule.hpp"

namespace emlog {

inline constexpr std::size_t kTextFieldSize = 256;
inline constexpr std::size_t kMaxChunkPayload = 254;
inline constexpr std::size_t kRecordSize = 4 + 32 + kTextFieldSize;
inline constexpr std::size_t kBlockHeaderSize = 4 + 1 + 4 + 4;
inline constexpr std::uint16_t kLengthMask = 0x0FFF;
inline constexpr std::uint16_t kContinuationFlag = 0x1000;
inline constexpr std::uint16_t kReservedMask = 0xE000;

using TextField = std::array<std::uint8_t, kTextFieldSize>;

// Throws invalid_parameter when payload exceeds 254 bytes.
TextField encode_text_field(ByteView payload, bool continuation);

struct LogRecord {
  std::uint32_t msg_id = 0;
  crypto::Digest tag{};
  TextField text{};

  // Throws parse_error on a malformed prefix.
  ByteView payload() const;
  bool continuation() const;

  void serialize(Bytes& out) const;
  static LogRecord parse(Reader& in);

  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

crypto::Digest compute_tag(const MessageKey& key, const TextField& text);

/// Tags one record and erases the message key. key must be at coordinate
/// (block_id, msg_id) or the call fails with key_misuse.
LogRecord make_record(std::uint32_t block_id, std::uint32_t msg_id, ByteView payload, MessageKey& key,
                      bool continuation = false);

struct Block {
  std::uint32_t block_id = 0;
  std::vector<LogRecord> records;
  crypto::Signature signature{};

  Bytes signed_preimage() const;
  Bytes serialize() const;
  static Block parse(ByteView data);  // throws parse_error

  std::size_t serialized_size() const { return kBlockHeaderSize + records.size() * kRecordSize + 64; }

  friend bool operator==(const Block&, const Block&) = default;
};

/// A block under construction. Signing consumes it.
class BlockBuilder {
 public:
  explicit BlockBuilder(std::uint32_t block_id) : block_id_(block_id) {}

  std::uint32_t block_id() const { return block_id_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::uint32_t next_msg_id() const { return static_cast<std::uint32_t>(records_.size()); }

  // Appends a record tagged with key, which is erased.
  void append(ByteView payload, MessageKey& key, bool continuation = false);

  friend Block sign_block(BlockBuilder&& builder, const DeviceIdentity& identity);

 private:
  std::uint32_t block_id_;
  std::vector<LogRecord> records_;
};

// Throws invalid_parameter on an empty block.
Block sign_block(BlockBuilder&& builder, const DeviceIdentity& identity);

enum class BlockStatus {
  ok,
  bad_signature,
  bad_hmac,
  order_violation,
  gap,
  seal_failure,
  truncation,
  missing_state,
  state_mismatch,
  parse_error,
};

const char* status_name(BlockStatus s) noexcept;

// Signature over the signed preimage only; tags are not recomputed.
BlockStatus verify_block_public(const Block& block, const crypto::PublicKey& pk);
// Throws parse_error on malformed encodings, e.g. a truncated signature.
BlockStatus verify_block_public(ByteView encoded, const crypto::PublicKey& pk);

struct BlockVerification {
  std::uint32_t block_id = 0;
  BlockStatus status = BlockStatus::ok;
  bool signature_ok = false;
  bool structure_ok = false;                // msg ids 0..n-1 in order, 1 <= n <= m
  std::vector<std::uint32_t> bad_hmac;      // record positions whose tag fails
  std::optional<std::uint32_t> first_bad;   // first failing record position

  bool hmac_ok() const { return bad_hmac.empty(); }
};

/// Re-derives the block's message keys from the root key, recomputes every
/// tag and checks the signature. Tags are checked against the key for the
/// record's position, so moved records fail where they land.
BlockVerification verify_block_full(const Block& block, const RootLoggingKey& rlk, const ChainParams& params,
                                    const crypto::PublicKey& pk);

/// Same, starting from an already derived block key (compromise analysis).
BlockVerification verify_block_with_key(const Block& block, const BlockKey& bk, const ChainParams& params,
                                        const crypto::PublicKey& pk);

struct Finding {
  std::uint32_t block_id = 0;
  BlockStatus status = BlockStatus::ok;
  std::optional<std::uint32_t> msg_id;
  std::optional<std::size_t> position;  // index in the received sequence
  std::string detail;
};

struct VerificationReport {
  std::vector<Finding> entries;  // one per received block, then sequence findings
  bool ok = true;
  std::optional<std::pair<std::uint32_t, std::uint32_t>> first_failure;  // (block, msg)
  bool hmac_verified = false;
  bool key_mismatch_suspected = false;
  std::size_t blocks_checked = 0;
  std::size_t records_checked = 0;
  std::vector<std::string> notes;

  void add(Finding f);
  std::string to_json() const;
};

/// One position in a retrieved or loaded sequence. A block that could not be
/// unsealed or parsed is present by id with a failure status.
struct SequenceItem {
  std::uint32_t block_id = 0;
  std::optional<Block> block;
  BlockStatus load_status = BlockStatus::ok;
  std::string detail;
};

struct SequenceCheck {
  std::uint32_t expected_start = 0;
  std::optional<ChainState> state;        // nullopt: state missing
  std::optional<std::uint32_t> range_end;  // inclusive; nullopt: up to state latest
  const RootLoggingKey* rlk = nullptr;     // nullptr: public mode
  ChainParams params;
  crypto::PublicKey pk;
};

VerificationReport verify_sequence(std::span<const SequenceItem> items, const SequenceCheck& check);
VerificationReport verify_sequence(std::span<const Block> blocks, const SequenceCheck& check);

}  // namespace emlog

#endif  // EMLOG_LOGCHAIN_HPP

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

#include "logchain.hpp"

#include <algorithm>
#include <cstring>
#include <unordered_set>

#include "json.hpp"

namespace emlog {

namespace {

constexpr std::uint8_t kBlockVersion = 1;

void tag_preimage(std::uint32_t block_id, std::uint32_t msg_id, const TextField& text, crypto::Digest& out,
                  ByteView key) {
  auto b = be32(block_id);
  auto i = be32(msg_id);
  crypto::hmac_sha256(key, {b, i, text}, out.data());
}

bool structure_ok(const Block& block, const ChainParams& params) {
  if (block.records.empty() || block.records.size() > params.m) return false;
  for (std::size_t i = 0; i < block.records.size(); ++i)
    if (block.records[i].msg_id != i) return false;
  return true;
}

}  // namespace

TextField encode_text_field(ByteView payload, bool continuation) {
  if (payload.size() > kMaxChunkPayload)
    fail(Errc::invalid_parameter, "record text exceeds " + std::to_string(kMaxChunkPayload) + " bytes");
  TextField f{};
  auto prefix = static_cast<std::uint16_t>(payload.size() | (continuation ? kContinuationFlag : 0));
  f[0] = static_cast<std::uint8_t>(prefix >> 8);
  f[1] = static_cast<std::uint8_t>(prefix);
  std::copy(payload.begin(), payload.end(), f.begin() + 2);
  return f;
}

ByteView LogRecord::payload() const {
  std::uint16_t prefix = static_cast<std::uint16_t>((text[0] << 8) | text[1]);
  if ((prefix & kReservedMask) != 0) fail(Errc::parse_error, "record: reserved prefix bits set");
  std::size_t len = prefix & kLengthMask;
  if (len > kMaxChunkPayload) fail(Errc::parse_error, "record: length prefix out of range");
  return {text.data() + 2, len};
}

bool LogRecord::continuation() const {
  return ((text[0] << 8) & kContinuationFlag) != 0;
}

void LogRecord::serialize(Bytes& out) const {
  put_be32(out, msg_id);
  put_bytes(out, tag);
  put_bytes(out, text);
}

LogRecord LogRecord::parse(Reader& in) {
  LogRecord r;
  r.msg_id = in.be32();
  auto tag = in.take(r.tag.size());
  std::copy(tag.begin(), tag.end(), r.tag.begin());
  auto text = in.take(kTextFieldSize);
  std::copy(text.begin(), text.end(), r.text.begin());
  return r;
}

crypto::Digest compute_tag(const MessageKey& key, const TextField& text) {
  crypto::Digest out{};
  tag_preimage(key.block_id, key.msg_id, text, out, key.key.view());
  return out;
}

LogRecord make_record(std::uint32_t block_id, std::uint32_t msg_id, ByteView payload, MessageKey& key,
                      bool continuation) {
  if (key.block_id != block_id || key.msg_id != msg_id)
    fail(Errc::key_misuse, "message key coordinate does not match record");
  LogRecord r;
  r.msg_id = msg_id;
  r.text = encode_text_field(payload, continuation);
  r.tag = compute_tag(key, r.text);
  key.key.wipe();
  return r;
}

Bytes Block::signed_preimage() const {
  Bytes out;
  out.reserve(8 + records.size() * 32);
  put_be32(out, block_id);
  put_be32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) put_bytes(out, r.tag);
  return out;
}

Bytes Block::serialize() const {
  Bytes out;
  out.reserve(serialized_size());
  put_bytes(out, as_bytes("EMLB"));
  out.push_back(kBlockVersion);
  put_be32(out, block_id);
  put_be32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) r.serialize(out);
  put_bytes(out, signature);
  return out;
}

Block Block::parse(ByteView data) {
  Reader in(data);
  if (as_chars(in.take(4)) != "EMLB") fail(Errc::parse_error, "block: bad magic");
  if (in.u8() != kBlockVersion) fail(Errc::parse_error, "block: unsupported version");
  Block b;
  b.block_id = in.be32();
  std::uint32_t count = in.be32();
  if (static_cast<std::uint64_t>(count) * kRecordSize + 64 != in.remaining())
    fail(Errc::parse_error, "block: length does not match record count");
  b.records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) b.records.push_back(LogRecord::parse(in));
  auto sig = in.take(64);
  std::copy(sig.begin(), sig.end(), b.signature.begin());
  in.expect_done();
  return b;
}

void BlockBuilder::append(ByteView payload, MessageKey& key, bool continuation) {
  records_.push_back(make_record(block_id_, next_msg_id(), payload, key, continuation));
}

Block sign_block(BlockBuilder&& builder, const DeviceIdentity& identity) {
  if (builder.records_.empty()) fail(Errc::invalid_parameter, "cannot sign an empty block");
  Block b;
  b.block_id = builder.block_id_;
  b.records = std::move(builder.records_);
  builder.records_.clear();
  b.signature = identity.sign(b.signed_preimage());
  return b;
}

const char* status_name(BlockStatus s) noexcept {
  switch (s) {
    case BlockStatus::ok: return "ok";
    case BlockStatus::bad_signature: return "bad-signature";
    case BlockStatus::bad_hmac: return "bad-hmac";
    case BlockStatus::order_violation: return "order-violation";
    case BlockStatus::gap: return "gap";
    case BlockStatus::seal_failure: return "seal-failure";
    case BlockStatus::truncation: return "truncation";
    case BlockStatus::missing_state: return "missing-state";
    case BlockStatus::state_mismatch: return "state-mismatch";
    case BlockStatus::parse_error: return "parse-error";
  }
  return "unknown";
}

BlockStatus verify_block_public(const Block& block, const crypto::PublicKey& pk) {
  return pk.verify(block.signed_preimage(), block.signature) ? BlockStatus::ok : BlockStatus::bad_signature;
}

BlockStatus verify_block_public(ByteView encoded, const crypto::PublicKey& pk) {
  return verify_block_public(Block::parse(encoded), pk);
}

BlockVerification verify_block_with_key(const Block& block, const BlockKey& bk, const ChainParams& params,
                                        const crypto::PublicKey& pk) {
  BlockVerification v;
  v.block_id = block.block_id;
  v.signature_ok = verify_block_public(block, pk) == BlockStatus::ok;
  v.structure_ok = structure_ok(block, params);

  const std::size_t keyed = std::min<std::size_t>(block.records.size(), params.m);
  if (keyed > 0) {
    MessageKey k = first_message_key(bk);
    crypto::Digest expect{};
    for (std::uint32_t i = 0; i < keyed; ++i) {
      if (i > 0) k = next_message_key(k, params);
      const LogRecord& r = block.records[i];
      tag_preimage(block.block_id, i, r.text, expect, k.key.view());
      if (!crypto::equal(expect, r.tag)) v.bad_hmac.push_back(i);
    }
  }
  for (std::size_t i = keyed; i < block.records.size(); ++i) v.bad_hmac.push_back(static_cast<std::uint32_t>(i));

  if (!v.bad_hmac.empty()) {
    v.status = BlockStatus::bad_hmac;
    v.first_bad = v.bad_hmac.front();
  } else if (!v.structure_ok) {
    v.status = BlockStatus::order_violation;
    for (std::size_t i = 0; i < block.records.size(); ++i)
      if (block.records[i].msg_id != i) {
        v.first_bad = static_cast<std::uint32_t>(i);
        break;
      }
  } else if (!v.signature_ok) {
    v.status = BlockStatus::bad_signature;
  }
  return v;
}

BlockVerification verify_block_full(const Block& block, const RootLoggingKey& rlk, const ChainParams& params,
                                    const crypto::PublicKey& pk) {
  BlockKey bk = derive_block_key(rlk, params, block.block_id);
  return verify_block_with_key(block, bk, params, pk);
}

void VerificationReport::add(Finding f) {
  if (f.status != BlockStatus::ok) {
    if (ok) first_failure = std::make_pair(f.block_id, f.msg_id.value_or(0));
    ok = false;
  }
  entries.push_back(std::move(f));
}

std::string VerificationReport::to_json() const {
  nlohmann::json j;
  j["verdict"] = ok ? "ok" : "fail";
  j["hmac_verified"] = hmac_verified;
  j["key_mismatch_suspected"] = key_mismatch_suspected;
  j["blocks_checked"] = blocks_checked;
  j["records_checked"] = records_checked;
  if (first_failure) j["first_failure"] = {{"block_id", first_failure->first}, {"msg_id", first_failure->second}};
  else j["first_failure"] = nullptr;
  j["notes"] = notes;
  auto& arr = j["entries"] = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json o{{"block_id", e.block_id}, {"status", status_name(e.status)}};
    if (e.msg_id) o["msg_id"] = *e.msg_id;
    if (e.position) o["position"] = *e.position;
    if (!e.detail.empty()) o["detail"] = e.detail;
    arr.push_back(std::move(o));
  }
  return j.dump(2);
}

VerificationReport verify_sequence(std::span<const SequenceItem> items, const SequenceCheck& check) {
  VerificationReport report;
  report.hmac_verified = check.rlk != nullptr;
  if (!report.hmac_verified) report.notes.emplace_back("hmac-unverified (no RLK)");

  std::uint64_t expected = check.expected_start;
  std::size_t all_bad_blocks = 0;
  std::size_t verified_blocks = 0;

  for (std::size_t pos = 0; pos < items.size(); ++pos) {
    const SequenceItem& item = items[pos];
    const std::uint64_t id = item.block_id;

    if (id < expected) {
      report.add({item.block_id, BlockStatus::order_violation, std::nullopt, pos,
                  "block id " + std::to_string(id) + " out of order (expected " + std::to_string(expected) + ")"});
    } else if (id > expected) {
      bool missing_later = false;
      for (std::size_t q = pos + 1; q < items.size() && !missing_later; ++q)
        missing_later = items[q].block_id >= expected && items[q].block_id < id;
      if (missing_later) {
        report.add({item.block_id, BlockStatus::order_violation, std::nullopt, pos,
                    "block id " + std::to_string(id) + " precedes block " + std::to_string(expected)});
      } else {
        report.add({static_cast<std::uint32_t>(expected), BlockStatus::gap, std::nullopt, pos,
                    "blocks " + std::to_string(expected) + ".." + std::to_string(id - 1) + " missing"});
      }
    }

    Finding f{item.block_id, BlockStatus::ok, std::nullopt, pos, {}};
    if (item.load_status != BlockStatus::ok || !item.block) {
      f.status = item.load_status == BlockStatus::ok ? BlockStatus::parse_error : item.load_status;
      f.detail = item.detail;
    } else {
      const Block& block = *item.block;
      ++report.blocks_checked;
      report.records_checked += block.records.size();
      if (block.block_id != item.block_id) {
        f.status = BlockStatus::order_violation;
        f.detail = "stored under id " + std::to_string(item.block_id) + " but claims " +
                   std::to_string(block.block_id);
      } else if (check.rlk != nullptr) {
        BlockVerification v = verify_block_full(block, *check.rlk, check.params, check.pk);
        ++verified_blocks;
        if (!block.records.empty() && v.bad_hmac.size() == block.records.size()) ++all_bad_blocks;
        f.status = v.status;
        f.msg_id = v.first_bad;
        if (v.status == BlockStatus::bad_hmac) {
          f.detail = std::to_string(v.bad_hmac.size()) + " record tag(s) invalid";
          if (!v.signature_ok) f.detail += "; signature invalid";
        }
      } else {
        if (!structure_ok(block, check.params)) {
          f.status = BlockStatus::order_violation;
          f.detail = "record ids not contiguous from 0 or block longer than m";
        } else {
          f.status = verify_block_public(block, check.pk);
        }
      }
    }
    report.add(std::move(f));
    expected = std::max(expected, id + 1);
  }

  if (check.rlk != nullptr && verified_blocks > 0 && all_bad_blocks == verified_blocks) {
    report.key_mismatch_suspected = true;
    report.notes.emplace_back("every record failed: root key mismatch suspected rather than point tampering");
  }

  if (!check.state) {
    report.add({check.expected_start, BlockStatus::missing_state, std::nullopt, std::nullopt,
                "chain state record missing"});
    return report;
  }

  const ChainState& st = *check.state;
  std::optional<std::uint32_t> target = st.latest();
  if (target && check.range_end) target = std::min(*target, *check.range_end);
  if (target && *target >= check.expected_start && expected <= *target) {
    report.add({static_cast<std::uint32_t>(expected), BlockStatus::truncation, std::nullopt, std::nullopt,
                "blocks " + std::to_string(expected) + ".." + std::to_string(*target) +
                    " missing; state records latest=" + std::to_string(st.latest_block)});
  }
  for (std::size_t pos = 0; pos < items.size(); ++pos) {
    if (!st.has_blocks || items[pos].block_id > st.latest_block) {
      report.add({items[pos].block_id, BlockStatus::state_mismatch, std::nullopt, pos,
                  "block beyond the committed chain state"});
      break;
    }
  }
  return report;
}

VerificationReport verify_sequence(std::span<const Block> blocks, const SequenceCheck& check) {
  std::vector<SequenceItem> items;
  items.reserve(blocks.size());
  for (const auto& b : blocks) items.push_back({b.block_id, b, BlockStatus::ok, {}});
  return verify_sequence(items, check);
}

}  // namespace emlog

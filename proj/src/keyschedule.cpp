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

#include "keyschedule.hpp"

#include <cstring>
#include <string>

#include "crypto.hpp"

namespace emlog {

namespace {

// HKDF-Extract: PRK = HMAC(salt, IKM).
void extract(ByteView salt, ByteView ikm, std::uint8_t* prk) {
  static const std::array<std::uint8_t, 32> zero_salt{};
  crypto::hmac_sha256(salt.empty() ? ByteView(zero_salt) : salt, {ikm}, prk);
}

// Label || BE32(a) [|| BE32(b)], at most 11 bytes.
struct Info {
  std::array<std::uint8_t, 16> buf{};
  std::size_t len = 0;

  Info(const char* label, std::uint32_t a) { append(label, a); }
  Info(const char* label, std::uint32_t a, std::uint32_t b) {
    append(label, a);
    auto e = be32(b);
    std::memcpy(buf.data() + len, e.data(), 4);
    len += 4;
  }
  ByteView view() const { return {buf.data(), len}; }

 private:
  void append(const char* label, std::uint32_t a) {
    std::size_t n = std::strlen(label);
    std::memcpy(buf.data(), label, n);
    auto e = be32(a);
    std::memcpy(buf.data() + n, e.data(), 4);
    len = n + 4;
  }
};

void derive(ByteView ikm, const Info& info, Key32& out) {
  hkdf32(ikm, kSchemeSalt, info.view(), out);
}

}  // namespace

SecretBuffer hkdf(ByteView ikm, ByteView salt, ByteView info, std::size_t out_len) {
  if (out_len > kHkdfMaxOutput)
    fail(Errc::invalid_parameter, "hkdf: output length exceeds 255 * HashLen");
  Key32 prk;
  extract(salt, ikm, prk.data());

  // HKDF-Expand: T(i) = HMAC(PRK, T(i-1) || info || i).
  SecretBuffer okm(out_len);
  Key32 t;
  std::size_t done = 0;
  for (std::uint8_t counter = 1; done < out_len; ++counter) {
    const std::uint8_t ctr[1] = {counter};
    ByteView prev = counter == 1 ? ByteView{} : t.view();
    crypto::hmac_sha256(prk.view(), {prev, info, ByteView(ctr, 1)}, t.data());
    std::size_t n = std::min<std::size_t>(32, out_len - done);
    std::memcpy(okm.data() + done, t.data(), n);
    done += n;
  }
  return okm;
}

void hkdf32(ByteView ikm, ByteView salt, ByteView info, Key32& out) {
  Key32 prk;
  extract(salt, ikm, prk.data());
  const std::uint8_t ctr[1] = {1};
  crypto::hmac_sha256(prk.view(), {info, ByteView(ctr, 1)}, out.data());
}

ChainParams ChainParams::make(std::uint32_t c, std::uint32_t m) {
  if (c == 0 || m == 0) fail(Errc::invalid_parameter, "chain params: c and m must be >= 1");
  return ChainParams{c, m};
}

RootLoggingKey RootLoggingKey::generate() {
  Key32 k;
  crypto::random_fill({k.data(), Key32::size_bytes});
  return RootLoggingKey(k.view());
}

const Key32& RootLoggingKey::key() const {
  if (destroyed_) fail(Errc::key_unavailable, "root logging key has been destroyed");
  return key_;
}

IntermediateKey derive_ik(const RootLoggingKey& rlk, std::uint32_t group_id) {
  IntermediateKey ik;
  ik.group_id = group_id;
  derive(rlk.key().view(), Info("IK", group_id), ik.key);
  return ik;
}

BlockKey first_block_key(const IntermediateKey& ik, std::uint32_t block_id, const ChainParams& params) {
  if (params.first_block_of(ik.group_id) != block_id)
    fail(Errc::invalid_parameter, "block " + std::to_string(block_id) + " is not the first block of group " +
                                      std::to_string(ik.group_id));
  BlockKey bk;
  bk.block_id = block_id;
  derive(ik.key.view(), Info("BK0", block_id), bk.key);
  return bk;
}

BlockKey next_block_key(BlockKey& prev, std::uint32_t block_id, const ChainParams& params) {
  if (prev.block_id == UINT32_MAX || block_id != prev.block_id + 1)
    fail(Errc::invalid_parameter, "block ids must be consecutive");
  if (params.starts_group(block_id))
    fail(Errc::invalid_parameter, "block " + std::to_string(block_id) + " starts a new group");
  BlockKey bk;
  bk.block_id = block_id;
  derive(prev.key.view(), Info("BK", block_id), bk.key);
  prev.key.wipe();
  return bk;
}

MessageKey first_message_key(const BlockKey& bk) {
  MessageKey k;
  k.block_id = bk.block_id;
  k.msg_id = 0;
  derive(bk.key.view(), Info("MK", bk.block_id, 0), k.key);
  return k;
}

MessageKey next_message_key(MessageKey& prev, const ChainParams& params) {
  if (static_cast<std::uint64_t>(prev.msg_id) + 1 >= params.m)
    fail(Errc::block_full, "block " + std::to_string(prev.block_id) + " is full");
  MessageKey k;
  k.block_id = prev.block_id;
  k.msg_id = prev.msg_id + 1;
  derive(prev.key.view(), Info("MK", k.block_id, k.msg_id), k.key);
  prev.key.wipe();
  return k;
}

BlockKey derive_block_key(const IntermediateKey& ik, const ChainParams& params, std::uint32_t block_id) {
  if (params.group_of(block_id) != ik.group_id)
    fail(Errc::invalid_parameter, "block outside the intermediate key's group");
  auto first = static_cast<std::uint32_t>(params.first_block_of(ik.group_id));
  BlockKey bk = first_block_key(ik, first, params);
  for (std::uint32_t b = first + 1; b <= block_id; ++b) bk = next_block_key(bk, b, params);
  return bk;
}

BlockKey derive_block_key(const RootLoggingKey& rlk, const ChainParams& params, std::uint32_t block_id) {
  IntermediateKey ik = derive_ik(rlk, params.group_of(block_id));
  return derive_block_key(ik, params, block_id);
}

MessageKey derive_message_key(const BlockKey& bk, const ChainParams& params, std::uint32_t msg_id) {
  if (msg_id >= params.m) fail(Errc::block_full, "message index beyond block length");
  MessageKey k = first_message_key(bk);
  while (k.msg_id < msg_id) k = next_message_key(k, params);
  return k;
}

}  // namespace emlog

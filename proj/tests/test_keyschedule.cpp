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

#include <random>

#include "crypto.hpp"
#include "doctest.h"
#include "keyschedule.hpp"
#include "oracle.hpp"

using namespace emlog;

namespace {

oracle::Bytes to_vec(ByteView v) { return {v.begin(), v.end()}; }

struct Rfc5869Case {
  const char* ikm;
  const char* salt;
  const char* info;
  std::size_t len;
  const char* okm;
};

oracle::Bytes iota_bytes(std::uint8_t from, std::uint8_t to) {
  oracle::Bytes out;
  for (int v = from; v <= to; ++v) out.push_back(static_cast<std::uint8_t>(v));
  return out;
}

RootLoggingKey key_from_seed(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::array<std::uint8_t, 32> raw{};
  for (auto& b : raw) b = static_cast<std::uint8_t>(rng());
  return RootLoggingKey(raw);
}

}  // namespace

TEST_CASE("hkdf matches RFC 5869 appendix A SHA-256 vectors") {
  // Test case 1.
  oracle::Bytes ikm1(22, 0x0b);
  oracle::Bytes salt1 = iota_bytes(0x00, 0x0c);
  oracle::Bytes info1 = iota_bytes(0xf0, 0xf9);
  auto okm1 = oracle::from_hex(
      "3cb25f25faacd57a90434f64d0362f2a2d2d0a90cf1a5a4c5db02d56ecc4c5bf34007208d5b887185865");
  // Test case 2.
  oracle::Bytes ikm2 = iota_bytes(0x00, 0x4f);
  oracle::Bytes salt2 = iota_bytes(0x60, 0xaf);
  oracle::Bytes info2 = iota_bytes(0xb0, 0xff);
  auto okm2 = oracle::from_hex(
      "b11e398dc80327a1c8e7f78c596a49344f012eda2d4efad8a050cc4c19afa97c59045a99cac7827271cb41c65e590e09da32"
      "75600c2f09b8367793a9aca3db71cc30c58179ec3e87c14c01d5c1f3434f1d87");
  // Test case 3: empty salt and info.
  oracle::Bytes ikm3(22, 0x0b);
  auto okm3 = oracle::from_hex(
      "8da4e775a563c18f715f802a063c5a31b8a11f5c5ee1879ec3454e5f3c738d2d9d201395faa4b61a96c8");

  // The oracle itself must reproduce the published vectors first.
  CHECK(oracle::hkdf(ikm1, salt1, info1, 42) == okm1);
  CHECK(oracle::hkdf(ikm2, salt2, info2, 82) == okm2);
  CHECK(oracle::hkdf(ikm3, {}, {}, 42) == okm3);

  CHECK(to_vec(hkdf(ikm1, salt1, info1, 42).view()) == okm1);
  CHECK(to_vec(hkdf(ikm2, salt2, info2, 82).view()) == okm2);
  CHECK(to_vec(hkdf(ikm3, {}, {}, 42).view()) == okm3);
}

TEST_CASE("hkdf is deterministic and sensitive to one info bit") {
  oracle::Bytes ikm(22, 0x0b);
  oracle::Bytes info = iota_bytes(0xf0, 0xf9);
  auto a = to_vec(hkdf(ikm, kSchemeSalt, info, 42).view());
  auto b = to_vec(hkdf(ikm, kSchemeSalt, info, 42).view());
  CHECK(a == b);
  info[3] ^= 0x01;
  auto c = to_vec(hkdf(ikm, kSchemeSalt, info, 42).view());
  CHECK(a != c);
  CHECK(c == oracle::hkdf(ikm, to_vec(kSchemeSalt), info, 42));
}

TEST_CASE("hkdf output length limits") {
  oracle::Bytes ikm(32, 1);
  CHECK(hkdf(ikm, {}, {}, 0).size() == 0);
  CHECK(hkdf(ikm, {}, {}, kHkdfMaxOutput).size() == kHkdfMaxOutput);
  CHECK(to_vec(hkdf(ikm, {}, {}, 1000).view()) == oracle::hkdf(ikm, {}, {}, 1000));
  try {
    hkdf(ikm, {}, {}, kHkdfMaxOutput + 1);
    FAIL("expected invalid_parameter");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_parameter);
  }
}

TEST_CASE("scheme salt is SHA-256 of its label") {
  CHECK(to_vec(kSchemeSalt) == oracle::scheme_salt());
}

TEST_CASE("intermediate keys are position addressed and domain separated") {
  RootLoggingKey rlk = key_from_seed(1);
  IntermediateKey ik0 = derive_ik(rlk, 0);
  IntermediateKey ik1 = derive_ik(rlk, 1);
  CHECK_FALSE(ik0.key == ik1.key);

  RootLoggingKey verifier_copy(rlk.key().view());
  CHECK(derive_ik(verifier_copy, 5).key == derive_ik(rlk, 5).key);

  // Walking 0..999 one by one and jumping straight to 999 agree, and both match
  // the oracle formula.
  Key32 walked;
  for (std::uint32_t g = 0; g < 1000; ++g) walked = derive_ik(rlk, g).key.clone();
  IntermediateKey direct = derive_ik(rlk, 999);
  CHECK(walked == direct.key);
  auto expect = oracle::hkdf(to_vec(rlk.key().view()), oracle::scheme_salt(),
                             oracle::cat({oracle::label("IK"), oracle::be32(999)}), 32);
  CHECK(to_vec(direct.key.view()) == expect);
}

TEST_CASE("destroyed root key is unavailable") {
  RootLoggingKey rlk = key_from_seed(2);
  rlk.destroy();
  CHECK(rlk.destroyed());
  try {
    derive_ik(rlk, 0);
    FAIL("expected key_unavailable");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::key_unavailable);
  }
}

TEST_CASE("first block key must be the group's first block") {
  RootLoggingKey rlk = key_from_seed(3);
  ChainParams p = ChainParams::make(10, 4);
  IntermediateKey ik2 = derive_ik(rlk, 2);
  BlockKey bk = first_block_key(ik2, 20, p);
  CHECK(bk.block_id == 20);
  CHECK_THROWS_AS(first_block_key(ik2, 21, p), Error);

  IntermediateKey ik0 = derive_ik(rlk, 0);
  BlockKey a = first_block_key(ik0, 0, p);
  BlockKey b = first_block_key(ik0, 0, p);
  CHECK(a.key == b.key);
}

TEST_CASE("block chain agrees with full re-derivation and erases predecessors") {
  RootLoggingKey rlk = key_from_seed(4);
  ChainParams p = ChainParams::make(10, 4);
  IntermediateKey ik = derive_ik(rlk, 0);
  BlockKey bk0 = first_block_key(ik, 0, p);
  BlockKey bk1 = next_block_key(bk0, 1, p);
  CHECK(bk0.key.is_zero());
  BlockKey bk2 = next_block_key(bk1, 2, p);
  CHECK(bk1.key.is_zero());

  BlockKey again = derive_block_key(rlk, p, 2);
  CHECK(again.key == bk2.key);
  auto mk = oracle::message_key(to_vec(rlk.key().view()), 10, 2, 0);
  CHECK(to_vec(first_message_key(bk2).key.view()) == mk);
}

TEST_CASE("next block key rejects group boundaries and gaps") {
  RootLoggingKey rlk = key_from_seed(5);
  ChainParams p = ChainParams::make(10, 4);
  BlockKey bk9 = derive_block_key(rlk, p, 9);
  try {
    next_block_key(bk9, 10, p);
    FAIL("expected invalid_parameter");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_parameter);
  }
  CHECK_FALSE(bk9.key.is_zero());  // failed call leaves the key alone

  BlockKey bk3 = derive_block_key(rlk, p, 3);
  CHECK_THROWS_AS(next_block_key(bk3, 5, p), Error);
  CHECK_THROWS_AS(next_block_key(bk3, 3, p), Error);
}

TEST_CASE("message key chain") {
  RootLoggingKey rlk = key_from_seed(6);

  SUBCASE("m = 1 allows exactly one message") {
    ChainParams p = ChainParams::make(1, 1);
    BlockKey bk = derive_block_key(rlk, p, 0);
    MessageKey k = first_message_key(bk);
    try {
      next_message_key(k, p);
      FAIL("expected block_full");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::block_full);
    }
  }

  SUBCASE("m = 100 chain matches the oracle") {
    ChainParams p = ChainParams::make(3, 100);
    BlockKey bk = derive_block_key(rlk, p, 4);
    MessageKey k = first_message_key(bk);
    const auto raw = to_vec(rlk.key().view());
    const oracle::Bytes salt = oracle::scheme_salt();
    oracle::Bytes expect = oracle::message_key(raw, 3, 4, 0);
    for (std::uint32_t i = 0; i < 100; ++i) {
      if (i > 0) {
        MessageKey prev_alias_check = std::move(k);
        k = next_message_key(prev_alias_check, p);
        CHECK(prev_alias_check.key.is_zero());
        expect = oracle::hkdf(expect, salt, oracle::cat({oracle::label("MK"), oracle::be32(4), oracle::be32(i)}), 32);
      }
      REQUIRE(k.msg_id == i);
      CHECK(to_vec(k.key.view()) == expect);
    }
    CHECK_THROWS_AS(next_message_key(k, p), Error);
  }

  SUBCASE("coordinates are both bound") {
    ChainParams p = ChainParams::make(10, 10);
    MessageKey a = derive_message_key(derive_block_key(rlk, p, 3), p, 5);
    MessageKey b = derive_message_key(derive_block_key(rlk, p, 5), p, 3);
    CHECK_FALSE(a.key == b.key);
  }
}

TEST_CASE("group confinement: a group's keys come from its IK alone") {
  RootLoggingKey rlk = key_from_seed(7);
  ChainParams p = ChainParams::make(5, 3);
  IntermediateKey ik = derive_ik(rlk, 3);
  for (std::uint32_t b = 15; b < 20; ++b) {
    BlockKey from_ik = derive_block_key(ik, p, b);
    BlockKey from_rlk = derive_block_key(rlk, p, b);
    CHECK(from_ik.key == from_rlk.key);
  }
  CHECK_THROWS_AS(derive_block_key(ik, p, 20), Error);
  CHECK_THROWS_AS(derive_block_key(ik, p, 14), Error);
}

TEST_CASE("chain params validation") {
  CHECK_THROWS_AS(ChainParams::make(0, 1), Error);
  CHECK_THROWS_AS(ChainParams::make(1, 0), Error);
  ChainParams p = ChainParams::make(10, 100);
  CHECK(p.group_of(25) == 2);
  CHECK(p.first_block_of(2) == 20);
  CHECK(p.starts_group(30));
}

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

#include <doctest.h>

#include <fstream>

#include "oracle.hpp"
#include "sealstore.hpp"
#include "test_util.hpp"

using namespace emlog;
namespace fs = std::filesystem;
using testutil::TempDir;

namespace {

Bytes root_bytes(std::uint8_t fill) { return Bytes(32, fill); }

Manifest test_manifest(std::uint32_t c, std::uint32_t m, std::string app = "emlog.test") {
  Manifest man;
  man.params = ChainParams::make(c, m);
  man.device_id = random_device_id();
  man.app_id = std::move(app);
  return man;
}

Bytes slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const Bytes& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

struct Fixture {
  TempDir tmp{"emlog-store"};
  Bytes root = root_bytes(0x42);
  Manifest man = test_manifest(4, 8);
  DeviceIdentity id = DeviceIdentity::create(Role::device);
  std::mt19937_64 rng{7};
  RootLoggingKey rlk = testutil::random_rlk(rng);

  SealedStore create() { return SealedStore::create(tmp.path(), StorageKey::derive(root, as_bytes(man.app_id)), man); }
  SealedStore reopen() { return SealedStore::open(tmp.path(), StorageKey::derive(root, as_bytes(man.app_id))); }
  std::vector<Block> blocks(std::uint32_t first, std::uint32_t count, std::uint32_t per = 8) {
    return testutil::build_chain(rlk, man.params, id, first, count, per, rng);
  }
};

}  // namespace

TEST_CASE("storage key matches the reference derivation") {
  Bytes root = root_bytes(0x11);
  StorageKey k = StorageKey::derive(root, as_bytes("app.one"));
  oracle::Bytes expect = oracle::storage_key(oracle::Bytes(root.begin(), root.end()), "app.one");
  CHECK(Bytes(k.view().begin(), k.view().end()) == expect);
}

TEST_CASE("seal round trip, including empty payload, opens with the reference AEAD") {
  StorageKey k = StorageKey::derive(root_bytes(1), as_bytes("a"));
  oracle::Bytes okey = oracle::storage_key(Bytes(32, 1), "a");
  for (std::size_t len : {0u, 1u, 292u, 5000u}) {
    Bytes payload(len);
    for (std::size_t i = 0; i < len; ++i) payload[i] = static_cast<std::uint8_t>(i * 7);
    SealedObject obj = seal(ObjectType::block, 9, payload, k);
    Bytes enc = obj.encode();
    CHECK(enc.size() == payload.size() + kSealOverhead);
    SecretBuffer back = unseal_expected(enc, k, ObjectType::block, 9);
    CHECK(Bytes(back.view().begin(), back.view().end()) == payload);
    oracle::Bytes plain;
    REQUIRE(oracle::gcm_open(okey, enc, plain));
    CHECK(plain == payload);
  }
  CHECK(k.writes() == 4);
}

TEST_CASE("every single-byte mutation of a sealed object fails authentication") {
  StorageKey k = StorageKey::derive(root_bytes(2), as_bytes("a"));
  Bytes payload(100, 0x5a);
  Bytes enc = seal(ObjectType::ik, 3, payload, k).encode();
  std::size_t missed = 0;
  for (std::size_t pos = 0; pos < enc.size(); ++pos) {
    Bytes m = enc;
    m[pos] ^= 0x01;
    try {
      unseal_expected(m, k, ObjectType::ik, 3);
      ++missed;
    } catch (const Error& e) {
      if (e.code() != Errc::auth_failure) ++missed;
    }
  }
  CHECK(missed == 0);
  // Truncation at any length is also rejected.
  for (std::size_t len = 0; len < enc.size(); len += 7) {
    Bytes t(enc.begin(), enc.begin() + static_cast<std::ptrdiff_t>(len));
    CHECK_THROWS_AS(unseal_expected(t, k, ObjectType::ik, 3), Error);
  }
}

TEST_CASE("cross-application and wrong-root keys cannot unseal") {
  std::vector<std::string> apps{"app.a", "app.b", "app.c"};
  std::vector<Bytes> roots{root_bytes(3), root_bytes(4)};
  struct Sealed {
    std::size_t r, a;
    Bytes enc;
  };
  std::vector<Sealed> sealed;
  for (std::size_t r = 0; r < roots.size(); ++r)
    for (std::size_t a = 0; a < apps.size(); ++a) {
      StorageKey k = StorageKey::derive(roots[r], as_bytes(apps[a]));
      sealed.push_back({r, a, seal(ObjectType::secret, 0, as_bytes("secret"), k).encode()});
    }
  for (const auto& s : sealed)
    for (std::size_t r = 0; r < roots.size(); ++r)
      for (std::size_t a = 0; a < apps.size(); ++a) {
        StorageKey k = StorageKey::derive(roots[r], as_bytes(apps[a]));
        bool same = s.r == r && s.a == a;
        if (same) {
          CHECK_NOTHROW(unseal_expected(s.enc, k, ObjectType::secret, 0));
        } else {
          try {
            unseal_expected(s.enc, k, ObjectType::secret, 0);
            FAIL("foreign key unsealed");
          } catch (const Error& e) {
            CHECK(e.code() == Errc::auth_failure);
          }
        }
      }
}

TEST_CASE("a sealed object renamed to another id or type is rejected") {
  StorageKey k = StorageKey::derive(root_bytes(5), as_bytes("a"));
  Bytes enc = seal(ObjectType::block, 4, as_bytes("x"), k).encode();
  CHECK_THROWS_AS(unseal_expected(enc, k, ObjectType::block, 5), Error);
  CHECK_THROWS_AS(unseal_expected(enc, k, ObjectType::ik, 4), Error);
}

TEST_CASE("payload limit and nonce budget") {
  StorageKey k = StorageKey::derive(root_bytes(6), as_bytes("a"));
  Bytes big(65);
  CHECK_THROWS_AS(seal(ObjectType::block, 0, big, k, 64), Error);
  CHECK(k.writes() == 0);
  CHECK_NOTHROW(seal(ObjectType::block, 0, Bytes(64), k, 64));
}

TEST_CASE("manifest encoding round trip") {
  Manifest m = test_manifest(25, 100, "x.y");
  m.max_payload = 12345;
  Manifest d = Manifest::decode(m.encode());
  CHECK(d.params == m.params);
  CHECK(d.device_id == m.device_id);
  CHECK(d.app_id == m.app_id);
  CHECK(d.max_payload == 12345);
  Bytes bad = m.encode();
  bad[0] = 'X';
  CHECK_THROWS_AS(Manifest::decode(bad), Error);
}

TEST_CASE("store create, commit in order, reopen") {
  Fixture f;
  SealedStore s = f.create();
  REQUIRE(s.state());
  CHECK_FALSE(s.state()->has_blocks);
  CHECK_THROWS_AS(f.create(), Error);

  auto bl = f.blocks(0, 3);
  s.commit_block(bl[0]);
  s.commit_block(bl[1]);
  s.commit_block(bl[2]);
  CHECK(s.state()->latest_block == 2);
  CHECK(s.state()->sealed_block_count == 3);

  SealedStore r = f.reopen();
  REQUIRE(r.state());
  CHECK(*r.state() == *s.state());
  CHECK(r.block_ids() == std::vector<std::uint32_t>{0, 1, 2});
  for (std::uint32_t i = 0; i < 3; ++i) CHECK(r.load_block(i) == bl[i]);
  CHECK(r.block_file_size(0) == kSealOverhead + bl[0].serialized_size());
  try {
    r.load_block(7);
    FAIL("missing block loaded");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::not_found);
  }
}

TEST_CASE("out-of-order and duplicate commits are refused") {
  Fixture f;
  SealedStore s = f.create();
  auto bl = f.blocks(0, 3);
  try {
    s.commit_block(bl[1]);
    FAIL("commit of block 1 first accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_parameter);
  }
  s.commit_block(bl[0]);
  CHECK_THROWS_AS(s.commit_block(bl[0]), Error);
  CHECK_THROWS_AS(s.commit_block(bl[2]), Error);
  CHECK(s.state()->latest_block == 0);
  std::vector<Block> gap{bl[1], bl[1]};
  CHECK_THROWS_AS(s.commit_blocks(gap), Error);
  CHECK(s.block_ids() == std::vector<std::uint32_t>{0});
}

TEST_CASE("group commit writes one state for several blocks") {
  Fixture f;
  SealedStore s = f.create();
  auto bl = f.blocks(0, 4);
  std::uint64_t before = s.state()->commit_counter;
  ChainState st = s.commit_blocks(bl);
  CHECK(st.commit_counter == before + 1);
  CHECK(st.latest_block == 3);
  CHECK(st.latest_group == 0);
  CHECK(st.sealed_block_count == 4);
}

TEST_CASE("intermediate keys seal once and survive restart") {
  Fixture f;
  SealedStore s = f.create();
  IntermediateKey ik = derive_ik(f.rlk, 1);
  Key32 expect = ik.key.clone();
  s.seal_ik(ik);
  CHECK(ik.key.is_zero());
  CHECK(s.has_ik(1));
  CHECK_FALSE(s.has_ik(0));
  IntermediateKey again = derive_ik(f.rlk, 1);
  try {
    s.seal_ik(again);
    FAIL("duplicate IK accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::already_exists);
  }
  SealedStore r = f.reopen();
  IntermediateKey loaded = r.load_ik(1);
  CHECK(loaded.key == expect);
  // Mid-group resume: block 5 from the sealed IK without the root key.
  BlockKey bk4 = first_block_key(loaded, 4, f.man.params);
  BlockKey bk5 = next_block_key(bk4, 5, f.man.params);
  CHECK(bk5.key == derive_block_key(f.rlk, f.man.params, 5).key);
}

TEST_CASE("no plaintext from records, keys or secrets appears on disk") {
  Fixture f;
  SealedStore s = f.create();
  std::vector<std::vector<std::string>> texts;
  auto bl = testutil::build_chain(f.rlk, f.man.params, f.id, 0, 4, 8, f.rng, &texts);
  s.commit_blocks(bl);
  IntermediateKey ik = derive_ik(f.rlk, 0);
  Bytes ik_raw(ik.key.view().begin(), ik.key.view().end());
  s.seal_ik(ik);
  s.write_secret(f.rlk.key().view());

  std::vector<Bytes> needles;
  for (const auto& bt : texts)
    for (const auto& t : bt)
      if (t.size() >= 12) needles.push_back(Bytes(t.begin(), t.begin() + 12));
  for (const auto& b : bl) needles.push_back(Bytes(b.records[0].tag.begin(), b.records[0].tag.end()));
  needles.push_back(ik_raw);
  needles.push_back(Bytes(f.rlk.key().view().begin(), f.rlk.key().view().end()));
  needles.push_back(Bytes(f.man.app_id.begin(), f.man.app_id.end()));
  REQUIRE(needles.size() > 10);

  std::size_t hits = 0;
  for (const auto& e : fs::directory_iterator(f.tmp.path())) {
    Bytes content = slurp(e.path());
    for (const auto& n : needles)
      if (std::search(content.begin(), content.end(), n.begin(), n.end()) != content.end()) ++hits;
  }
  CHECK(hits == 0);
  SecretBuffer secret = s.read_secret();
  CHECK(Bytes(secret.view().begin(), secret.view().end()) ==
        Bytes(f.rlk.key().view().begin(), f.rlk.key().view().end()));
}

TEST_CASE("tampered block files and deleted state are visible") {
  Fixture f;
  SealedStore s = f.create();
  s.commit_blocks(f.blocks(0, 3));
  fs::path p = f.tmp.path() / SealedStore::block_file_name(1);
  Bytes content = slurp(p);
  content[content.size() / 2] ^= 0x80;
  spit(p, content);
  SealedStore r = f.reopen();
  try {
    r.load_block(1);
    FAIL("tampered block loaded");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::auth_failure);
  }
  fs::remove(f.tmp.path() / "state.seal");
  SealedStore r2 = f.reopen();
  CHECK_FALSE(r2.state());
  CHECK_THROWS_AS(r2.commit_block(f.blocks(3, 1)[0]), Error);
}

TEST_CASE("a state file rolled back to an older copy is authentic but behind") {
  Fixture f;
  SealedStore s = f.create();
  auto bl = f.blocks(0, 3);
  s.commit_block(bl[0]);
  Bytes old_state = slurp(f.tmp.path() / "state.seal");
  s.commit_block(bl[1]);
  s.commit_block(bl[2]);
  spit(f.tmp.path() / "state.seal", old_state);
  SealedStore r = f.reopen();
  REQUIRE(r.state());
  CHECK(r.state()->latest_block == 0);
  // Blocks beyond the state are orphans to recovery and are quarantined
  // unless they extend it contiguously and verify.
  RecoveryReport rep = r.recover(f.id.public_key());
  CHECK(rep.adopted == std::vector<std::uint32_t>{1, 2});
}

TEST_CASE("mark_delivered keeps the highest watermark") {
  Fixture f;
  SealedStore s = f.create();
  s.commit_blocks(f.blocks(0, 3));
  s.mark_delivered(2);
  s.mark_delivered(1);
  SealedStore r = f.reopen();
  REQUIRE(r.state()->delivered_watermark);
  CHECK(*r.state()->delivered_watermark == 2);
  CHECK(r.state()->latest_block == 2);
}

TEST_CASE("crash at every commit step leaves a consistent recoverable store") {
  const CommitStep steps[] = {CommitStep::block_temp_written, CommitStep::block_renamed,
                              CommitStep::state_temp_written, CommitStep::state_renamed};
  for (CommitStep step : steps) {
    for (std::uint64_t target : {3u, 4u}) {
      CAPTURE(commit_step_name(step));
      CAPTURE(target);
      Fixture f;
      SealedStore s = f.create();
      auto bl = f.blocks(0, 5);
      s.commit_blocks(std::span<const Block>(bl.data(), 3));
      s.set_fault_hook([&](CommitStep at, std::uint64_t id) {
        bool state_step = at == CommitStep::state_temp_written || at == CommitStep::state_renamed;
        if (at == step && (state_step || id == target)) throw SimulatedCrash{};
      });
      bool crashed = false;
      try {
        s.commit_blocks(std::span<const Block>(bl.data() + 3, 2));
      } catch (const SimulatedCrash&) {
        crashed = true;
      }
      CHECK(crashed);

      SealedStore r = f.reopen();
      REQUIRE(r.state());
      std::uint32_t committed = r.state()->latest_block;
      // Either the old state or the new one, never something in between.
      CHECK((committed == 2 || committed == 4));
      if (step == CommitStep::state_renamed) CHECK(committed == 4);
      RecoveryReport rep = r.recover(f.id.public_key());
      for (const auto& e : fs::directory_iterator(f.tmp.path())) CHECK(e.path().extension() != ".tmp");
      REQUIRE(r.state());
      std::uint32_t latest = r.state()->latest_block;
      CHECK(latest >= committed);
      for (std::uint32_t b = 0; b <= latest; ++b) CHECK(r.load_block(b) == bl[b]);
      // Resuming continues right after the recovered state.
      if (latest < 4) {
        std::vector<Block> rest(bl.begin() + latest + 1, bl.end());
        r.commit_blocks(rest);
      }
      CHECK(r.state()->latest_block == 4);
      CHECK(rep.quarantined.empty());
    }
  }
}

TEST_CASE("recovery quarantines orphans that do not verify or do not extend the chain") {
  Fixture f;
  SealedStore s = f.create();
  auto bl = f.blocks(0, 6);
  s.commit_blocks(std::span<const Block>(bl.data(), 2));
  DeviceIdentity other = DeviceIdentity::create(Role::device);
  // Orphan 2 signed by another key, orphan 5 non-contiguous.
  auto forged = testutil::build_chain(f.rlk, f.man.params, other, 2, 1, 8, f.rng);
  StorageKey& k = s.storage_key();
  spit(f.tmp.path() / SealedStore::block_file_name(2), seal(ObjectType::block, 2, forged[0].serialize(), k).encode());
  spit(f.tmp.path() / SealedStore::block_file_name(5), seal(ObjectType::block, 5, bl[5].serialize(), k).encode());
  spit(f.tmp.path() / "junk.tmp", Bytes(3));
  RecoveryReport rep = s.recover(f.id.public_key());
  CHECK(rep.adopted.empty());
  CHECK(rep.quarantined.size() == 2);
  CHECK(rep.temp_files_removed == 1);
  CHECK(fs::exists(f.tmp.path() / "quarantine" / SealedStore::block_file_name(2)));
  CHECK(s.block_ids() == std::vector<std::uint32_t>{0, 1});
  CHECK(s.state()->latest_block == 1);
}

TEST_CASE("root key file is created once and reused") {
  TempDir t;
  fs::path p = t.path() / "hw_root.key";
  Key32 a = load_or_create_root_key(p);
  Key32 b = load_or_create_root_key(p);
  CHECK(a == b);
  CHECK(fs::file_size(p) == 32);
  CHECK((fs::status(p).permissions() & fs::perms::others_read) == fs::perms::none);
}

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

#include "sealstore.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "crypto.hpp"

namespace emlog {

namespace fs = std::filesystem;

namespace {

constexpr std::uint8_t kSealVersion = 1;
constexpr std::uint8_t kManifestVersion = 1;
constexpr const char* kManifestFile = "manifest.seal";
constexpr const char* kStateFile = "state.seal";
constexpr const char* kSecretFile = "secret.seal";
constexpr const char* kLockFile = ".lock";

std::string errno_text(const std::string& what, const fs::path& p) {
  return what + " " + p.string() + ": " + std::strerror(errno);
}

Bytes read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    if (!fs::exists(p)) fail(Errc::not_found, "missing file " + p.string());
    fail(Errc::io_error, "cannot read " + p.string());
  }
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void fsync_dir(const fs::path& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) fail(Errc::io_error, errno_text("open dir", dir));
  ::fsync(fd);
  ::close(fd);
}

bool valid_object_type(std::uint8_t t) { return t >= 1 && t <= 5; }

// Advisory lock serialising state commits between processes sharing a store.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) {
    fs::path p = dir / kLockFile;
    fd_ = ::open(p.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0600);
    if (fd_ < 0) fail(Errc::io_error, errno_text("open lock", p));
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      fail(Errc::io_error, errno_text("lock", p));
    }
  }
  ~DirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

std::optional<std::uint32_t> parse_numbered(const std::string& name, std::string_view prefix) {
  constexpr std::string_view suffix = ".seal";
  if (name.size() != prefix.size() + 10 + suffix.size()) return std::nullopt;
  if (name.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) return std::nullopt;
  std::uint64_t v = 0;
  for (std::size_t i = prefix.size(); i < prefix.size() + 10; ++i) {
    if (name[i] < '0' || name[i] > '9') return std::nullopt;
    v = v * 10 + static_cast<std::uint64_t>(name[i] - '0');
  }
  if (v > UINT32_MAX) return std::nullopt;
  return static_cast<std::uint32_t>(v);
}

std::string numbered(std::string_view prefix, std::uint32_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*s%010u.seal", static_cast<int>(prefix.size()), prefix.data(), id);
  return buf;
}

}  // namespace

// ---- SealedObject ----------------------------------------------------------

Bytes SealedObject::header() const {
  Bytes h;
  h.reserve(kSealHeaderSize);
  put_bytes(h, as_bytes("EMLS"));
  h.push_back(kSealVersion);
  h.push_back(static_cast<std::uint8_t>(type));
  put_be64(h, object_id);
  return h;
}

Bytes SealedObject::encode() const {
  Bytes out = header();
  put_bytes(out, nonce);
  put_bytes(out, ciphertext);
  return out;
}

SealedObject SealedObject::decode(ByteView data) {
  Reader r(data);
  if (as_chars(r.take(4)) != "EMLS") fail(Errc::parse_error, "sealed object: bad magic");
  if (r.u8() != kSealVersion) fail(Errc::parse_error, "sealed object: unsupported version");
  std::uint8_t type = r.u8();
  if (!valid_object_type(type)) fail(Errc::parse_error, "sealed object: unknown type");
  SealedObject o;
  o.type = static_cast<ObjectType>(type);
  o.object_id = r.be64();
  auto n = r.take(12);
  std::copy(n.begin(), n.end(), o.nonce.begin());
  if (r.remaining() < crypto::kGcmTagSize) fail(Errc::parse_error, "sealed object: truncated");
  o.ciphertext = r.bytes(r.remaining());
  return o;
}

// ---- keys and sealing ------------------------------------------------------

StorageKey StorageKey::derive(ByteView root_storage_key, ByteView app_id) {
  Bytes info;
  put_bytes(info, as_bytes("SSK"));
  put_bytes(info, app_id);
  StorageKey k;
  hkdf32(root_storage_key, kSchemeSalt, info, k.key_);
  return k;
}

void StorageKey::note_write() {
  if (writes_ >= kMaxWritesPerKey) fail(Errc::crypto_failure, "storage key nonce budget exhausted");
  ++writes_;
}

SealedObject seal(ObjectType type, std::uint64_t object_id, ByteView payload, StorageKey& key,
                  std::size_t max_payload) {
  if (payload.size() > max_payload) fail(Errc::invalid_parameter, "payload exceeds configured maximum");
  key.note_write();
  SealedObject o;
  o.type = type;
  o.object_id = object_id;
  crypto::random_fill(o.nonce);
  o.ciphertext = crypto::gcm_encrypt(key.view(), o.nonce, o.header(), payload);
  return o;
}

SecretBuffer unseal(const SealedObject& obj, const StorageKey& key) {
  return crypto::gcm_decrypt(key.view(), obj.nonce, obj.header(), obj.ciphertext);
}

SecretBuffer unseal_expected(ByteView encoded, const StorageKey& key, ObjectType type, std::uint64_t object_id) {
  SealedObject obj;
  try {
    obj = SealedObject::decode(encoded);
  } catch (const Error&) {
    // A damaged header is still tampering from the store's point of view.
    fail(Errc::auth_failure, "sealed object header damaged");
  }
  SecretBuffer plain = unseal(obj, key);
  if (obj.type != type || obj.object_id != object_id)
    fail(Errc::auth_failure, "sealed object is not the one expected at this name");
  return plain;
}

// ---- manifest --------------------------------------------------------------

Bytes Manifest::encode() const {
  Bytes out;
  put_bytes(out, as_bytes("EMLM"));
  out.push_back(kManifestVersion);
  put_be32(out, params.c);
  put_be32(out, params.m);
  put_bytes(out, device_id);
  put_be64(out, max_payload);
  put_lp_bytes(out, as_bytes(app_id));
  return out;
}

Manifest Manifest::decode(ByteView data) {
  Reader r(data);
  if (as_chars(r.take(4)) != "EMLM") fail(Errc::parse_error, "manifest: bad magic");
  if (r.u8() != kManifestVersion) fail(Errc::parse_error, "manifest: unsupported version");
  Manifest m;
  std::uint32_t c = r.be32();
  std::uint32_t len = r.be32();
  m.params = ChainParams::make(c, len);
  auto id = r.take(16);
  std::copy(id.begin(), id.end(), m.device_id.begin());
  m.max_payload = r.be64();
  Bytes app = r.lp_bytes(4096);
  m.app_id.assign(app.begin(), app.end());
  r.expect_done();
  return m;
}

const char* commit_step_name(CommitStep s) noexcept {
  switch (s) {
    case CommitStep::block_temp_written: return "block-temp-written";
    case CommitStep::block_renamed: return "block-renamed";
    case CommitStep::ik_temp_written: return "ik-temp-written";
    case CommitStep::ik_renamed: return "ik-renamed";
    case CommitStep::state_temp_written: return "state-temp-written";
    case CommitStep::state_renamed: return "state-renamed";
  }
  return "unknown";
}

// ---- SealedStore -----------------------------------------------------------

std::string SealedStore::block_file_name(std::uint32_t block_id) { return numbered("blk_", block_id); }
std::string SealedStore::ik_file_name(std::uint32_t group_id) { return numbered("ik_", group_id); }

SealedStore SealedStore::create(const fs::path& dir, StorageKey key, const Manifest& manifest) {
  fs::create_directories(dir);
  if (fs::exists(dir / kManifestFile)) fail(Errc::already_exists, "store already initialised: " + dir.string());
  SealedStore s(dir, std::move(key));
  DirLock lock(dir);
  s.manifest_ = manifest;
  SealedObject obj = seal(ObjectType::manifest, 0, manifest.encode(), s.key_, manifest.max_payload);
  s.write_atomic(kManifestFile, obj.encode(), CommitStep::state_temp_written, CommitStep::state_renamed, 0, true);
  s.write_state(ChainState{});
  return s;
}

SealedStore SealedStore::open(const fs::path& dir, StorageKey key) {
  SealedStore s(dir, std::move(key));
  Bytes raw;
  try {
    raw = read_file(dir / kManifestFile);
  } catch (const Error& e) {
    fail(Errc::io_error, std::string("cannot open store: ") + e.what());
  }
  SecretBuffer plain = unseal_expected(raw, s.key_, ObjectType::manifest, 0);
  s.manifest_ = Manifest::decode(plain.view());
  s.state_ = s.read_state_file();
  return s;
}

std::optional<ChainState> SealedStore::read_state_file() const {
  Bytes raw;
  try {
    raw = read_file(dir_ / kStateFile);
  } catch (const Error& e) {
    if (e.code() == Errc::not_found) return std::nullopt;
    throw;
  }
  // A state record that fails authentication is as good as missing.
  try {
    SecretBuffer plain = unseal_expected(raw, key_, ObjectType::state, 0);
    return ChainState::decode(plain.view());
  } catch (const Error&) {
    return std::nullopt;
  }
}

void SealedStore::write_atomic(const std::string& name, ByteView data, CommitStep temp_step, CommitStep done_step,
                               std::uint64_t id, bool sync_dir) {
  fs::path final_path = dir_ / name;
  fs::path tmp = dir_ / (name + ".tmp");
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
  if (fd < 0) fail(Errc::io_error, errno_text("create", tmp));
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      fail(Errc::io_error, errno_text("write", tmp));
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    fail(Errc::io_error, errno_text("fsync", tmp));
  }
  ::close(fd);
  if (hook_) hook_(temp_step, id);
  if (std::rename(tmp.c_str(), final_path.c_str()) != 0) fail(Errc::io_error, errno_text("rename", tmp));
  if (sync_dir) fsync_dir(dir_);
  if (hook_) hook_(done_step, id);
}

void SealedStore::write_state(ChainState next) {
  SealedObject obj = seal(ObjectType::state, 0, next.encode(), key_, manifest_.max_payload);
  write_atomic(kStateFile, obj.encode(), CommitStep::state_temp_written, CommitStep::state_renamed, 0, true);
  state_ = next;
}

ChainState SealedStore::commit_block(const Block& block) { return commit_blocks(std::span<const Block>(&block, 1)); }

ChainState SealedStore::commit_blocks(std::span<const Block> blocks) {
  if (blocks.empty()) fail(Errc::invalid_parameter, "nothing to commit");
  DirLock lock(dir_);
  // Another process may have advanced the watermark since we loaded.
  if (auto disk = read_state_file(); disk && (!state_ || disk->commit_counter > state_->commit_counter))
    state_ = disk;
  if (!state_) fail(Errc::integrity_alarm, "chain state missing; refusing to commit");

  std::uint64_t next = state_->has_blocks ? std::uint64_t{state_->latest_block} + 1 : 0;
  for (const Block& b : blocks) {
    if (b.block_id != next)
      fail(Errc::invalid_parameter, "out-of-order commit: got block " + std::to_string(b.block_id) +
                                        ", expected " + std::to_string(next));
    ++next;
  }

  for (const Block& b : blocks) {
    SealedObject obj = seal(ObjectType::block, b.block_id, b.serialize(), key_, manifest_.max_payload);
    write_atomic(block_file_name(b.block_id), obj.encode(), CommitStep::block_temp_written,
                 CommitStep::block_renamed, b.block_id, false);
  }
  fsync_dir(dir_);

  ChainState s = *state_;
  const Block& last = blocks.back();
  s.has_blocks = true;
  s.latest_block = last.block_id;
  s.latest_group = manifest_.params.group_of(last.block_id);
  s.latest_msg_count = static_cast<std::uint32_t>(last.records.size());
  s.sealed_block_count += blocks.size();
  s.commit_counter += 1;
  write_state(s);
  return s;
}

void SealedStore::seal_ik(IntermediateKey& ik) {
  const std::string name = ik_file_name(ik.group_id);
  if (fs::exists(dir_ / name)) fail(Errc::already_exists, "intermediate key already sealed for group " +
                                                            std::to_string(ik.group_id));
  SealedObject obj = seal(ObjectType::ik, ik.group_id, ik.key.view(), key_, manifest_.max_payload);
  write_atomic(name, obj.encode(), CommitStep::ik_temp_written, CommitStep::ik_renamed, ik.group_id, true);
  ik.key.wipe();
}

bool SealedStore::has_ik(std::uint32_t group_id) const { return fs::exists(dir_ / ik_file_name(group_id)); }

IntermediateKey SealedStore::load_ik(std::uint32_t group_id) const {
  Bytes raw = read_file(dir_ / ik_file_name(group_id));
  SecretBuffer plain = unseal_expected(raw, key_, ObjectType::ik, group_id);
  return IntermediateKey{group_id, Key32(plain.view())};
}

Block SealedStore::load_block(std::uint32_t block_id) const {
  Bytes raw = read_file(dir_ / block_file_name(block_id));
  SecretBuffer plain = unseal_expected(raw, key_, ObjectType::block, block_id);
  return Block::parse(plain.view());
}

std::vector<std::uint32_t> SealedStore::block_ids() const {
  std::vector<std::uint32_t> ids;
  for (const auto& e : fs::directory_iterator(dir_)) {
    if (!e.is_regular_file()) continue;
    if (auto id = parse_numbered(e.path().filename().string(), "blk_")) ids.push_back(*id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::uintmax_t SealedStore::block_file_size(std::uint32_t block_id) const {
  return fs::file_size(dir_ / block_file_name(block_id));
}

void SealedStore::write_secret(ByteView payload) {
  SealedObject obj = seal(ObjectType::secret, 0, payload, key_, manifest_.max_payload);
  write_atomic(kSecretFile, obj.encode(), CommitStep::state_temp_written, CommitStep::state_renamed, 0, true);
}

SecretBuffer SealedStore::read_secret() const {
  Bytes raw = read_file(dir_ / kSecretFile);
  return unseal_expected(raw, key_, ObjectType::secret, 0);
}

ChainState SealedStore::mark_delivered(std::uint32_t watermark) {
  DirLock lock(dir_);
  if (auto disk = read_state_file(); disk && (!state_ || disk->commit_counter > state_->commit_counter))
    state_ = disk;
  if (!state_) fail(Errc::integrity_alarm, "chain state missing");
  ChainState s = *state_;
  s.delivered_watermark = std::max(watermark, s.delivered_watermark.value_or(0));
  s.commit_counter += 1;
  write_state(s);
  return s;
}

RecoveryReport SealedStore::recover(const crypto::PublicKey& device_key) {
  RecoveryReport report;
  DirLock lock(dir_);
  for (const auto& e : fs::directory_iterator(dir_)) {
    if (e.is_regular_file() && e.path().extension() == ".tmp") {
      fs::remove(e.path());
      ++report.temp_files_removed;
    }
  }
  if (auto disk = read_state_file()) state_ = disk;
  if (!state_) return report;

  std::uint64_t next = state_->has_blocks ? std::uint64_t{state_->latest_block} + 1 : 0;
  std::vector<Block> adopted;
  for (std::uint32_t id : block_ids()) {
    if (id < next) continue;
    bool adoptable = false;
    if (id == next) {
      try {
        Block b = load_block(id);
        const auto& p = manifest_.params;
        bool shaped = b.block_id == id && !b.records.empty() && b.records.size() <= p.m;
        for (std::size_t i = 0; shaped && i < b.records.size(); ++i) shaped = b.records[i].msg_id == i;
        if (shaped && verify_block_public(b, device_key) == BlockStatus::ok) {
          adopted.push_back(std::move(b));
          adoptable = true;
          ++next;
        }
      } catch (const Error&) {
      }
    }
    if (!adoptable) {
      fs::path q = dir_ / "quarantine";
      fs::create_directories(q);
      std::string name = block_file_name(id);
      fs::rename(dir_ / name, q / name);
      report.quarantined.push_back(name);
    }
  }

  if (!adopted.empty()) {
    ChainState s = *state_;
    const Block& last = adopted.back();
    s.has_blocks = true;
    s.latest_block = last.block_id;
    s.latest_group = manifest_.params.group_of(last.block_id);
    s.latest_msg_count = static_cast<std::uint32_t>(last.records.size());
    s.sealed_block_count += adopted.size();
    s.commit_counter += 1;
    write_state(s);
    for (const auto& b : adopted) report.adopted.push_back(b.block_id);
  }
  return report;
}

// ---- emulated hardware root -------------------------------------------------

Key32 load_root_key(const fs::path& path) {
  Bytes raw = read_file(path);
  if (raw.size() != Key32::size_bytes) fail(Errc::parse_error, "root storage key must be 32 bytes");
  Key32 k(raw);
  secure_wipe(raw.data(), raw.size());
  return k;
}

Key32 load_or_create_root_key(const fs::path& path) {
  if (fs::exists(path)) return load_root_key(path);
  Key32 k;
  crypto::random_fill({k.data(), Key32::size_bytes});
  fs::create_directories(path.parent_path());
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0600);
  if (fd < 0) fail(Errc::io_error, errno_text("create", path));
  bool ok = ::write(fd, k.data(), Key32::size_bytes) == static_cast<ssize_t>(Key32::size_bytes) && ::fsync(fd) == 0;
  ::close(fd);
  if (!ok) fail(Errc::io_error, errno_text("write", path));
  return k;
}

namespace {
constexpr const char* kIdentityApp = "emlog.identity";
}

void save_identity_dir(const fs::path& dir, const DeviceIdentity& id) {
  fs::create_directories(dir);
  if (fs::exists(dir / "identity.seal")) fail(Errc::already_exists, "identity already exists in " + dir.string());
  Key32 root = load_or_create_root_key(dir / "hw_root.key");
  StorageKey key = StorageKey::derive(root.view(), as_bytes(kIdentityApp));
  SecretBuffer secret = id.secret_encode();
  Bytes sealed = seal(ObjectType::secret, 0, secret.view(), key).encode();
  std::ofstream out(dir / "identity.seal", std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(sealed.data()), static_cast<std::streamsize>(sealed.size()));
  std::ofstream pem(dir / "identity.pem", std::ios::trunc);
  pem << id.certificate().to_pem();
  if (!out || !pem) fail(Errc::io_error, "cannot write identity to " + dir.string());
}

DeviceIdentity load_identity_dir(const fs::path& dir) {
  Key32 root = load_root_key(dir / "hw_root.key");
  StorageKey key = StorageKey::derive(root.view(), as_bytes(kIdentityApp));
  Bytes raw = read_file(dir / "identity.seal");
  SecretBuffer secret = unseal_expected(raw, key, ObjectType::secret, 0);
  return DeviceIdentity::secret_decode(secret.view());
}

}  // namespace emlog

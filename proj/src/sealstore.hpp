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

// Sealed persistent storage on an untrusted file system.
//
// Every object is AES-256-GCM sealed under a storage key derived from the
// device root storage key and the application identity:
//
//   header  = "EMLS" | ver(1) | type(1) | BE64 object_id     (14 bytes, AAD)
//   file    = header | nonce(12) | ciphertext | tag(16)
//
// Store layout (one directory per device log):
//
//   hw_root.key        emulated device root storage key (32 raw bytes)
//   manifest.seal      chain parameters, device id, application id
//   secret.seal        root logging key + device signing identity
//   state.seal         ChainState, the truncation witness
//   device.pem         device certificate (public)
//   ik_<group>.seal    one per block group
//   blk_<block>.seal   one per committed block
//
// Files are written to "<name>.tmp", fsync'd, renamed into place and the
// directory fsync'd. Blocks always land before the state that covers them.

#ifndef EMLOG_SEALSTORE_HPP
#define EMLOG_SEALSTORE_HPP

#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "chainstate.hpp"
#include "identity.hpp"
#include "keyschedule.hpp"
#include "logchain.hpp"

namespace emlog {

enum class ObjectType : std::uint8_t { block = 1, ik = 2, state = 3, manifest = 4, secret = 5 };

inline constexpr std::size_t kSealHeaderSize = 14;
inline constexpr std::size_t kSealOverhead = kSealHeaderSize + 12 + 16;
inline constexpr std::size_t kDefaultMaxPayload = 16u << 20;
inline constexpr std::uint64_t kMaxWritesPerKey = 1ull << 32;

struct SealedObject {
  ObjectType type = ObjectType::block;
  std::uint64_t object_id = 0;
  std::array<std::uint8_t, 12> nonce{};
  Bytes ciphertext;  // includes the 16-byte GCM tag

  Bytes header() const;
  Bytes encode() const;
  static SealedObject decode(ByteView data);  // throws parse_error
};

class StorageKey {
 public:
  static StorageKey derive(ByteView root_storage_key, ByteView app_id);

  ByteView view() const { return key_.view(); }
  std::uint64_t writes() const { return writes_; }
  // Counts one nonce use; throws crypto_failure past kMaxWritesPerKey.
  void note_write();

 private:
  Key32 key_;
  std::uint64_t writes_ = 0;
};

inline StorageKey derive_storage_key(ByteView root_storage_key, ByteView app_id) {
  return StorageKey::derive(root_storage_key, app_id);
}

SealedObject seal(ObjectType type, std::uint64_t object_id, ByteView payload, StorageKey& key,
                  std::size_t max_payload = kDefaultMaxPayload);

// Any mutation of header, nonce, ciphertext or tag, and a wrong key, all
// surface as auth_failure.
SecretBuffer unseal(const SealedObject& obj, const StorageKey& key);

// Also checks that the header names the expected object; a file moved to
// another name fails with auth_failure.
SecretBuffer unseal_expected(ByteView encoded, const StorageKey& key, ObjectType type, std::uint64_t object_id);

struct Manifest {
  ChainParams params;
  DeviceId device_id{};
  std::string app_id;
  std::uint64_t max_payload = kDefaultMaxPayload;

  Bytes encode() const;
  static Manifest decode(ByteView data);
};

enum class CommitStep {
  block_temp_written,
  block_renamed,
  ik_temp_written,
  ik_renamed,
  state_temp_written,
  state_renamed,
};

const char* commit_step_name(CommitStep s) noexcept;

// Thrown by test fault hooks to emulate power loss at a commit step.
struct SimulatedCrash : std::exception {
  const char* what() const noexcept override { return "simulated crash"; }
};

using FaultHook = std::function<void(CommitStep, std::uint64_t object_id)>;

struct RecoveryReport {
  std::vector<std::uint32_t> adopted;      // uncommitted blocks re-committed
  std::vector<std::string> quarantined;    // files moved aside
  std::size_t temp_files_removed = 0;
};

class SealedStore {
 public:
  // Creates manifest and genesis state. already_exists when a manifest is present.
  static SealedStore create(const std::filesystem::path& dir, StorageKey key, const Manifest& manifest);
  // io_error when the manifest is missing; a missing state is tolerated and
  // reported by state() == nullopt.
  static SealedStore open(const std::filesystem::path& dir, StorageKey key);

  SealedStore(SealedStore&&) noexcept = default;
  SealedStore& operator=(SealedStore&&) noexcept = default;

  const std::filesystem::path& dir() const { return dir_; }
  const Manifest& manifest() const { return manifest_; }
  const std::optional<ChainState>& state() const { return state_; }
  StorageKey& storage_key() { return key_; }

  // Block id must be state.latest + 1 (0 for the first block), else
  // invalid_parameter. On io_error the in-memory state is unchanged.
  ChainState commit_block(const Block& block);
  // Commits consecutive blocks, then a single state update.
  ChainState commit_blocks(std::span<const Block> blocks);

  // Seals and erases ik. already_exists when the group was sealed before.
  void seal_ik(IntermediateKey& ik);
  bool has_ik(std::uint32_t group_id) const;
  IntermediateKey load_ik(std::uint32_t group_id) const;

  // not_found, auth_failure or parse_error.
  Block load_block(std::uint32_t block_id) const;
  std::vector<std::uint32_t> block_ids() const;
  std::uintmax_t block_file_size(std::uint32_t block_id) const;

  void write_secret(ByteView payload);
  SecretBuffer read_secret() const;

  ChainState mark_delivered(std::uint32_t watermark);

  // Removes temp files, re-commits verifiable uncommitted blocks directly
  // after the committed state and quarantines anything else beyond it.
  RecoveryReport recover(const crypto::PublicKey& device_key);

  void set_fault_hook(FaultHook hook) { hook_ = std::move(hook); }

  static std::string block_file_name(std::uint32_t block_id);
  static std::string ik_file_name(std::uint32_t group_id);

 private:
  SealedStore(std::filesystem::path dir, StorageKey key) : dir_(std::move(dir)), key_(std::move(key)) {}

  void write_atomic(const std::string& name, ByteView data, CommitStep temp_step, CommitStep done_step,
                    std::uint64_t id, bool sync_dir);
  void write_state(ChainState next);
  std::optional<ChainState> read_state_file() const;

  std::filesystem::path dir_;
  StorageKey key_;
  Manifest manifest_;
  std::optional<ChainState> state_;
  FaultHook hook_;
};

// Emulated hardware root: read or create the 32-byte root storage key.
Key32 load_or_create_root_key(const std::filesystem::path& path);
Key32 load_root_key(const std::filesystem::path& path);

// Standalone identity directory (verifier or authority): hw_root.key,
// identity.seal (the signing identity, sealed) and identity.pem.
void save_identity_dir(const std::filesystem::path& dir, const DeviceIdentity& id);
DeviceIdentity load_identity_dir(const std::filesystem::path& dir);

}  // namespace emlog

#endif  // EMLOG_SEALSTORE_HPP

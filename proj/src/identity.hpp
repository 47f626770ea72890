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

#ifndef EMLOG_IDENTITY_HPP
#define EMLOG_IDENTITY_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "crypto.hpp"

namespace emlog {

using DeviceId = std::array<std::uint8_t, 16>;

enum class Role : std::uint8_t { device = 1, verifier = 2, authority = 3 };

const char* role_name(Role r) noexcept;

/// Binds a P-256 public key to a 16-byte identifier and a role. Signed by the
/// issuer key; an identity may issue its own certificate.
///
/// Encoding: "EMLC" | ver(1) | role(1) | subject_id(16) | subject_pk(65) |
///           issuer_pk(65) | signature(64)            = 216 bytes
struct Certificate {
  Role role = Role::device;
  DeviceId subject_id{};
  crypto::PublicKey subject_key;
  crypto::PublicKey issuer_key;
  crypto::Signature signature{};

  Bytes to_be_signed() const;
  Bytes encode() const;
  static Certificate decode(ByteView data);  // throws parse_error

  std::string to_pem() const;
  static Certificate from_pem(std::string_view text);

  bool self_signed() const { return subject_key == issuer_key; }
  bool signature_valid() const;
};

inline constexpr std::size_t kCertificateSize = 216;

/// Accepts a certificate when its signature verifies under the public key of
/// one of the anchors.
class TrustAnchors {
 public:
  TrustAnchors() = default;
  explicit TrustAnchors(std::vector<Certificate> anchors) : anchors_(std::move(anchors)) {}

  // Loads every *.pem / *.cert file in a directory.
  static TrustAnchors load_dir(const std::filesystem::path& dir);

  void add(Certificate c) { anchors_.push_back(std::move(c)); }
  bool accepts(const Certificate& cert) const;
  bool empty() const { return anchors_.empty(); }

 private:
  std::vector<Certificate> anchors_;
};

/// Signing identity of one party. The private key never leaves this object
/// except through secret_encode(), whose output is only ever sealed.
class DeviceIdentity {
 public:
  // Self-signed when issuer is null.
  static DeviceIdentity create(Role role, const DeviceId& id, const DeviceIdentity* issuer = nullptr);
  static DeviceIdentity create(Role role, const DeviceIdentity* issuer = nullptr);

  const DeviceId& device_id() const { return cert_.subject_id; }
  Role role() const { return cert_.role; }
  const crypto::PublicKey& public_key() const { return key_.public_key(); }
  const Certificate& certificate() const { return cert_; }
  crypto::Signature sign(ByteView message) const { return key_.sign(message); }

  Certificate issue(Role role, const DeviceId& id, const crypto::PublicKey& subject) const;

  SecretBuffer secret_encode() const;
  static DeviceIdentity secret_decode(ByteView data);

 private:
  crypto::SigningKey key_;
  Certificate cert_;
};

DeviceId random_device_id();

}  // namespace emlog

#endif  // EMLOG_IDENTITY_HPP

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

// Thin RAII layer over the OpenSSL primitives the log scheme needs: SHA-256,
// HMAC-SHA256, AES-256-GCM, ECDSA/ECDH on P-256 and the system RNG. Nothing
// outside this file touches OpenSSL types directly.

#ifndef EMLOG_CRYPTO_HPP
#define EMLOG_CRYPTO_HPP

#include <array>
#include <initializer_list>
#include <memory>

#include "bytes.hpp"

typedef struct evp_pkey_st EVP_PKEY;

namespace emlog::crypto {

inline constexpr std::size_t kDigestSize = 32;
inline constexpr std::size_t kGcmNonceSize = 12;
inline constexpr std::size_t kGcmTagSize = 16;
inline constexpr std::size_t kPublicKeySize = 65;  // uncompressed SEC1 point
inline constexpr std::size_t kSignatureSize = 64;  // raw r || s

using Digest = std::array<std::uint8_t, kDigestSize>;
using Signature = std::array<std::uint8_t, kSignatureSize>;

Digest sha256(std::initializer_list<ByteView> parts);
inline Digest sha256(ByteView data) { return sha256({data}); }

void hmac_sha256(ByteView key, std::initializer_list<ByteView> parts, std::uint8_t* out);
Digest hmac_sha256(ByteView key, std::initializer_list<ByteView> parts);

// Constant-time equality.
bool equal(ByteView a, ByteView b) noexcept;

void random_fill(std::span<std::uint8_t> out);
Bytes random_bytes(std::size_t n);

// Returns ciphertext || 16-byte tag.
Bytes gcm_encrypt(ByteView key, ByteView nonce, ByteView aad, ByteView plaintext);
// Throws Error(auth_failure) on any tag mismatch.
SecretBuffer gcm_decrypt(ByteView key, ByteView nonce, ByteView aad, ByteView ciphertext_and_tag);

std::string base64_encode(ByteView data);
Bytes base64_decode(std::string_view text);  // throws parse_error

class PublicKey {
 public:
  PublicKey() = default;
  // Throws parse_error unless the octets are a valid uncompressed P-256 point.
  static PublicKey from_octets(ByteView octets);

  const std::array<std::uint8_t, kPublicKeySize>& octets() const { return octets_; }
  bool valid() const { return static_cast<bool>(pkey_); }
  bool verify(ByteView message, ByteView raw_signature) const;

  friend bool operator==(const PublicKey& a, const PublicKey& b) { return a.octets_ == b.octets_; }

 private:
  friend class SigningKey;
  friend class EphemeralKey;
  std::shared_ptr<EVP_PKEY> pkey_;
  std::array<std::uint8_t, kPublicKeySize> octets_{};
};

/// ECDSA P-256 private key. Serialized form is DER and is only ever
/// written inside a sealed object.
class SigningKey {
 public:
  static SigningKey generate();
  static SigningKey from_der(ByteView der);

  SecretBuffer to_der() const;
  const PublicKey& public_key() const { return public_; }
  Signature sign(ByteView message) const;

 private:
  std::shared_ptr<EVP_PKEY> pkey_;
  PublicKey public_;
};

/// One-shot ephemeral ECDH on P-256 for channel setup.
class EphemeralKey {
 public:
  static EphemeralKey generate();
  const std::array<std::uint8_t, kPublicKeySize>& public_octets() const { return public_.octets(); }
  // Throws auth_failure on an invalid peer point.
  SecretBuffer agree(ByteView peer_public) const;

 private:
  std::shared_ptr<EVP_PKEY> pkey_;
  PublicKey public_;
};

}  // namespace emlog::crypto

#endif  // EMLOG_CRYPTO_HPP

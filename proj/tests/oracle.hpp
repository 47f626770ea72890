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

// Test-only reference implementations. These go through OpenSSL's own HKDF
// (EVP_KDF) and one-shot HMAC(), never through emlog's key schedule, so they
// can check the production path independently.

#ifndef EMLOG_TESTS_ORACLE_HPP
#define EMLOG_TESTS_ORACLE_HPP

#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/kdf.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

using Bytes = std::vector<std::uint8_t>;

inline Bytes hkdf(const Bytes& ikm, const Bytes& salt, const Bytes& info, std::size_t len) {
  EVP_KDF* kdf = EVP_KDF_fetch(nullptr, "HKDF", nullptr);
  EVP_KDF_CTX* ctx = EVP_KDF_CTX_new(kdf);
  EVP_KDF_free(kdf);
  char digest[] = "SHA256";
  Bytes ikm_c = ikm, salt_c = salt, info_c = info;
  OSSL_PARAM params[5];
  int n = 0;
  params[n++] = OSSL_PARAM_construct_utf8_string(OSSL_KDF_PARAM_DIGEST, digest, 0);
  params[n++] = OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_KEY, ikm_c.data(), ikm_c.size());
  if (!salt_c.empty())
    params[n++] = OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_SALT, salt_c.data(), salt_c.size());
  params[n++] = OSSL_PARAM_construct_octet_string(OSSL_KDF_PARAM_INFO, info_c.data(), info_c.size());
  params[n] = OSSL_PARAM_construct_end();
  Bytes out(len);
  if (EVP_KDF_derive(ctx, out.data(), len, params) != 1) {
    EVP_KDF_CTX_free(ctx);
    throw std::runtime_error("oracle hkdf failed");
  }
  EVP_KDF_CTX_free(ctx);
  return out;
}

inline Bytes hmac(const Bytes& key, const Bytes& data) {
  Bytes out(32);
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(), out.data(), &len);
  return out;
}

inline Bytes be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
          static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

inline Bytes cat(std::initializer_list<Bytes> parts) {
  Bytes out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline Bytes label(const char* s) { return Bytes(s, s + std::strlen(s)); }

inline Bytes from_hex(const std::string& hex) {
  Bytes out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
    out.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  return out;
}

// Salt: SHA-256 of the ASCII label, computed here rather than copied.
inline Bytes scheme_salt() {
  Bytes out(32);
  const char* s = "emlog/v1/kdf-salt";
  unsigned int len = 0;
  EVP_Digest(s, std::strlen(s), out.data(), &len, EVP_sha256(), nullptr);
  return out;
}

// Straight-line re-derivation of k(b, i) from the root key, written from the
// documented formulas only.
inline Bytes message_key(const Bytes& rlk, std::uint32_t c, std::uint32_t block, std::uint32_t msg) {
  const Bytes salt = scheme_salt();
  std::uint32_t group = block / c;
  Bytes ik = hkdf(rlk, salt, cat({label("IK"), be32(group)}), 32);
  std::uint32_t first = group * c;
  Bytes bk = hkdf(ik, salt, cat({label("BK0"), be32(first)}), 32);
  for (std::uint32_t b = first + 1; b <= block; ++b) bk = hkdf(bk, salt, cat({label("BK"), be32(b)}), 32);
  Bytes k = hkdf(bk, salt, cat({label("MK"), be32(block), be32(0)}), 32);
  for (std::uint32_t i = 1; i <= msg; ++i) k = hkdf(k, salt, cat({label("MK"), be32(block), be32(i)}), 32);
  return k;
}

// Tag over BE32(block) || BE32(msg) || 256-byte text field.
inline Bytes record_tag(const Bytes& key, std::uint32_t block, std::uint32_t msg, const Bytes& field256) {
  return hmac(key, cat({be32(block), be32(msg), field256}));
}

// 256-byte text field: BE16 prefix (12-bit length, bit 12 = continuation) then
// payload, zero padded.
inline Bytes text_field(const Bytes& payload, bool continuation = false) {
  Bytes f(256, 0);
  std::uint16_t prefix = static_cast<std::uint16_t>(payload.size() | (continuation ? 0x1000 : 0));
  f[0] = static_cast<std::uint8_t>(prefix >> 8);
  f[1] = static_cast<std::uint8_t>(prefix);
  std::copy(payload.begin(), payload.end(), f.begin() + 2);
  return f;
}

// Storage key: HKDF(root, salt, "SSK" || app_id).
inline Bytes storage_key(const Bytes& root, const std::string& app_id) {
  return hkdf(root, scheme_salt(), cat({label("SSK"), Bytes(app_id.begin(), app_id.end())}), 32);
}

// Opens a sealed file: 14-byte header (AAD) | nonce(12) | ct | tag(16).
// Returns false on authentication failure.
inline bool gcm_open(const Bytes& key, const Bytes& file, Bytes& plain) {
  if (file.size() < 14 + 12 + 16) return false;
  const std::uint8_t* aad = file.data();
  const std::uint8_t* nonce = file.data() + 14;
  const std::uint8_t* ct = file.data() + 26;
  std::size_t ct_len = file.size() - 26 - 16;
  Bytes tag(file.end() - 16, file.end());
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  int len = 0;
  plain.assign(ct_len, 0);
  bool ok = EVP_DecryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr, key.data(), nonce) == 1 &&
            EVP_DecryptUpdate(ctx, nullptr, &len, aad, 14) == 1 &&
            (ct_len == 0 || EVP_DecryptUpdate(ctx, plain.data(), &len, ct, static_cast<int>(ct_len)) == 1) &&
            EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_TAG, 16, tag.data()) == 1 &&
            EVP_DecryptFinal_ex(ctx, plain.data() + ct_len, &len) == 1;
  EVP_CIPHER_CTX_free(ctx);
  return ok;
}

}  // namespace oracle

#endif  // EMLOG_TESTS_ORACLE_HPP

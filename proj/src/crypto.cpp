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

#include "crypto.hpp"

#include <openssl/core_names.h>
#include <openssl/crypto.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/params.h>
#include <openssl/rand.h>
#include <openssl/x509.h>

namespace emlog::crypto {

namespace {

struct PkeyFree {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct PkeyCtxFree {
  void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
struct MdCtxFree {
  void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
struct CipherCtxFree {
  void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};
struct MacCtxFree {
  void operator()(EVP_MAC_CTX* p) const { EVP_MAC_CTX_free(p); }
};
struct EcdsaSigFree {
  void operator()(ECDSA_SIG* p) const { ECDSA_SIG_free(p); }
};

using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxFree>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxFree>;
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxFree>;
using EcdsaSigPtr = std::unique_ptr<ECDSA_SIG, EcdsaSigFree>;

std::shared_ptr<EVP_PKEY> wrap(EVP_PKEY* p) {
  if (p == nullptr) fail(Errc::crypto_failure, "openssl: null key");
  return {p, PkeyFree{}};
}

void check(int rc, const char* what) {
  if (rc != 1) fail(Errc::crypto_failure, std::string("openssl: ") + what);
}

EVP_MAC* hmac_algorithm() {
  static EVP_MAC* mac = EVP_MAC_fetch(nullptr, "HMAC", nullptr);
  return mac;
}

EVP_MAC_CTX* thread_hmac_ctx() {
  thread_local std::unique_ptr<EVP_MAC_CTX, MacCtxFree> ctx([] {
    EVP_MAC_CTX* c = EVP_MAC_CTX_new(hmac_algorithm());
    char digest[] = "SHA256";
    OSSL_PARAM params[] = {
        OSSL_PARAM_construct_utf8_string(OSSL_MAC_PARAM_DIGEST, digest, 0),
        OSSL_PARAM_construct_end()};
    EVP_MAC_CTX_set_params(c, params);
    return c;
  }());
  return ctx.get();
}

std::array<std::uint8_t, kPublicKeySize> export_public(EVP_PKEY* pkey) {
  std::array<std::uint8_t, kPublicKeySize> out{};
  std::size_t len = 0;
  // Generated keys default to the compressed form.
  check(EVP_PKEY_set_utf8_string_param(pkey, OSSL_PKEY_PARAM_EC_POINT_CONVERSION_FORMAT, "uncompressed"),
        "set point format");
  check(EVP_PKEY_get_octet_string_param(pkey, OSSL_PKEY_PARAM_ENCODED_PUBLIC_KEY, out.data(), out.size(), &len),
        "export public key");
  if (len != kPublicKeySize || out[0] != 0x04) fail(Errc::crypto_failure, "unexpected point format");
  return out;
}

std::shared_ptr<EVP_PKEY> generate_p256() {
  return wrap(EVP_PKEY_Q_keygen(nullptr, nullptr, "EC", "P-256"));
}

}  // namespace

Digest sha256(std::initializer_list<ByteView> parts) {
  MdCtxPtr ctx(EVP_MD_CTX_new());
  check(EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr), "digest init");
  for (ByteView p : parts) check(EVP_DigestUpdate(ctx.get(), p.data(), p.size()), "digest update");
  Digest out{};
  unsigned int len = 0;
  check(EVP_DigestFinal_ex(ctx.get(), out.data(), &len), "digest final");
  return out;
}

void hmac_sha256(ByteView key, std::initializer_list<ByteView> parts, std::uint8_t* out) {
  static const std::uint8_t empty = 0;
  EVP_MAC_CTX* ctx = thread_hmac_ctx();
  // A null key pointer would make OpenSSL reuse the previous key.
  const std::uint8_t* k = key.empty() ? &empty : key.data();
  check(EVP_MAC_init(ctx, k, key.size(), nullptr), "hmac init");
  for (ByteView p : parts) check(EVP_MAC_update(ctx, p.data(), p.size()), "hmac update");
  std::size_t len = 0;
  check(EVP_MAC_final(ctx, out, &len, kDigestSize), "hmac final");
}

Digest hmac_sha256(ByteView key, std::initializer_list<ByteView> parts) {
  Digest out{};
  hmac_sha256(key, parts, out.data());
  return out;
}

bool equal(ByteView a, ByteView b) noexcept {
  return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

void random_fill(std::span<std::uint8_t> out) {
  if (out.empty()) return;
  check(RAND_bytes(out.data(), static_cast<int>(out.size())), "rand");
}

Bytes random_bytes(std::size_t n) {
  Bytes out(n);
  random_fill(out);
  return out;
}

Bytes gcm_encrypt(ByteView key, ByteView nonce, ByteView aad, ByteView plaintext) {
  if (key.size() != 32 || nonce.size() != kGcmNonceSize)
    fail(Errc::invalid_parameter, "gcm: bad key or nonce length");
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  check(EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(), nonce.data()), "gcm init");
  int len = 0;
  if (!aad.empty()) check(EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())), "gcm aad");
  Bytes out(plaintext.size() + kGcmTagSize);
  int written = 0;
  if (!plaintext.empty()) {
    check(EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(), static_cast<int>(plaintext.size())),
          "gcm update");
    written = len;
  }
  check(EVP_EncryptFinal_ex(ctx.get(), out.data() + written, &len), "gcm final");
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kGcmTagSize, out.data() + plaintext.size()),
        "gcm tag");
  return out;
}

SecretBuffer gcm_decrypt(ByteView key, ByteView nonce, ByteView aad, ByteView ct) {
  if (key.size() != 32 || nonce.size() != kGcmNonceSize)
    fail(Errc::invalid_parameter, "gcm: bad key or nonce length");
  if (ct.size() < kGcmTagSize) fail(Errc::auth_failure, "gcm: ciphertext shorter than tag");
  const std::size_t body = ct.size() - kGcmTagSize;
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  check(EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(), nonce.data()), "gcm init");
  int len = 0;
  if (!aad.empty()) check(EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())), "gcm aad");
  SecretBuffer out(body);
  int written = 0;
  if (body > 0) {
    check(EVP_DecryptUpdate(ctx.get(), out.data(), &len, ct.data(), static_cast<int>(body)), "gcm update");
    written = len;
  }
  std::array<std::uint8_t, kGcmTagSize> tag{};
  std::copy(ct.begin() + static_cast<std::ptrdiff_t>(body), ct.end(), tag.begin());
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kGcmTagSize, tag.data()), "gcm set tag");
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + written, &len) != 1)
    fail(Errc::auth_failure, "authenticated decryption failed");
  return out;
}

std::string base64_encode(ByteView data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  std::string clean;
  for (char ch : text)
    if (ch != '\n' && ch != '\r' && ch != ' ' && ch != '\t') clean.push_back(ch);
  if (clean.size() % 4 != 0) fail(Errc::parse_error, "base64: bad length");
  Bytes out(clean.size() / 4 * 3);
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                          static_cast<int>(clean.size()));
  if (n < 0) fail(Errc::parse_error, "base64: invalid input");
  std::size_t pad = 0;
  if (!clean.empty() && clean.back() == '=') ++pad;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

// ---- PublicKey -------------------------------------------------------------

PublicKey PublicKey::from_octets(ByteView octets) {
  if (octets.size() != kPublicKeySize || octets[0] != 0x04)
    fail(Errc::parse_error, "public key must be a 65-byte uncompressed point");
  char group[] = "prime256v1";
  Bytes copy(octets.begin(), octets.end());
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_utf8_string(OSSL_PKEY_PARAM_GROUP_NAME, group, 0),
      OSSL_PARAM_construct_octet_string(OSSL_PKEY_PARAM_PUB_KEY, copy.data(), copy.size()),
      OSSL_PARAM_construct_end()};
  PkeyCtxPtr ctx(EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
  EVP_PKEY* raw = nullptr;
  if (!ctx || EVP_PKEY_fromdata_init(ctx.get()) != 1 ||
      EVP_PKEY_fromdata(ctx.get(), &raw, EVP_PKEY_PUBLIC_KEY, params) != 1 || raw == nullptr)
    fail(Errc::parse_error, "public key is not a valid P-256 point");
  PublicKey pk;
  pk.pkey_ = wrap(raw);
  std::copy(octets.begin(), octets.end(), pk.octets_.begin());
  return pk;
}

bool PublicKey::verify(ByteView message, ByteView raw_signature) const {
  if (!pkey_ || raw_signature.size() != kSignatureSize) return false;
  EcdsaSigPtr sig(ECDSA_SIG_new());
  BIGNUM* r = BN_bin2bn(raw_signature.data(), 32, nullptr);
  BIGNUM* s = BN_bin2bn(raw_signature.data() + 32, 32, nullptr);
  if (ECDSA_SIG_set0(sig.get(), r, s) != 1) {
    BN_free(r);
    BN_free(s);
    return false;
  }
  unsigned char* der = nullptr;
  int der_len = i2d_ECDSA_SIG(sig.get(), &der);
  if (der_len <= 0) return false;
  MdCtxPtr md(EVP_MD_CTX_new());
  bool ok = EVP_DigestVerifyInit(md.get(), nullptr, EVP_sha256(), nullptr, pkey_.get()) == 1 &&
            EVP_DigestVerify(md.get(), der, static_cast<std::size_t>(der_len), message.data(), message.size()) == 1;
  OPENSSL_free(der);
  return ok;
}

// ---- SigningKey ------------------------------------------------------------

SigningKey SigningKey::generate() {
  SigningKey k;
  k.pkey_ = generate_p256();
  k.public_.pkey_ = k.pkey_;
  k.public_.octets_ = export_public(k.pkey_.get());
  return k;
}

SigningKey SigningKey::from_der(ByteView der) {
  const unsigned char* p = der.data();
  EVP_PKEY* raw = d2i_AutoPrivateKey(nullptr, &p, static_cast<long>(der.size()));
  if (raw == nullptr) fail(Errc::parse_error, "signing key: invalid DER");
  SigningKey k;
  k.pkey_ = wrap(raw);
  if (EVP_PKEY_get_base_id(raw) != EVP_PKEY_EC) fail(Errc::parse_error, "signing key: not an EC key");
  k.public_.pkey_ = k.pkey_;
  k.public_.octets_ = export_public(raw);
  return k;
}

SecretBuffer SigningKey::to_der() const {
  int n = i2d_PrivateKey(pkey_.get(), nullptr);
  if (n <= 0) fail(Errc::crypto_failure, "signing key: encode failed");
  SecretBuffer out(static_cast<std::size_t>(n));
  unsigned char* p = out.data();
  i2d_PrivateKey(pkey_.get(), &p);
  return out;
}

Signature SigningKey::sign(ByteView message) const {
  MdCtxPtr md(EVP_MD_CTX_new());
  check(EVP_DigestSignInit(md.get(), nullptr, EVP_sha256(), nullptr, pkey_.get()), "sign init");
  std::size_t len = 0;
  check(EVP_DigestSign(md.get(), nullptr, &len, message.data(), message.size()), "sign size");
  Bytes der(len);
  check(EVP_DigestSign(md.get(), der.data(), &len, message.data(), message.size()), "sign");
  const unsigned char* p = der.data();
  EcdsaSigPtr sig(d2i_ECDSA_SIG(nullptr, &p, static_cast<long>(len)));
  if (!sig) fail(Errc::crypto_failure, "sign: bad DER signature");
  const BIGNUM* r = nullptr;
  const BIGNUM* s = nullptr;
  ECDSA_SIG_get0(sig.get(), &r, &s);
  Signature out{};
  if (BN_bn2binpad(r, out.data(), 32) != 32 || BN_bn2binpad(s, out.data() + 32, 32) != 32)
    fail(Errc::crypto_failure, "sign: scalar too large");
  return out;
}

// ---- EphemeralKey ----------------------------------------------------------

EphemeralKey EphemeralKey::generate() {
  EphemeralKey k;
  k.pkey_ = generate_p256();
  k.public_.pkey_ = k.pkey_;
  k.public_.octets_ = export_public(k.pkey_.get());
  return k;
}

SecretBuffer EphemeralKey::agree(ByteView peer_public) const {
  PublicKey peer;
  try {
    peer = PublicKey::from_octets(peer_public);
  } catch (const Error&) {
    fail(Errc::auth_failure, "ecdh: invalid peer point");
  }
  PkeyCtxPtr ctx(EVP_PKEY_CTX_new(pkey_.get(), nullptr));
  check(EVP_PKEY_derive_init(ctx.get()), "ecdh init");
  check(EVP_PKEY_derive_set_peer(ctx.get(), peer.pkey_.get()), "ecdh peer");
  std::size_t len = 0;
  check(EVP_PKEY_derive(ctx.get(), nullptr, &len), "ecdh size");
  SecretBuffer out(len);
  check(EVP_PKEY_derive(ctx.get(), out.data(), &len), "ecdh derive");
  return out;
}

}  // namespace emlog::crypto

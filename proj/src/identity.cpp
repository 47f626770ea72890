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

#include "identity.hpp"

#include <fstream>
#include <sstream>

namespace emlog {

namespace {

constexpr std::uint8_t kCertVersion = 1;
constexpr std::uint8_t kIdentityVersion = 1;
constexpr std::string_view kPemBegin = "-----BEGIN EMLOG CERTIFICATE-----";
constexpr std::string_view kPemEnd = "-----END EMLOG CERTIFICATE-----";

Role parse_role(std::uint8_t v) {
  if (v < 1 || v > 3) fail(Errc::parse_error, "certificate: unknown role");
  return static_cast<Role>(v);
}

}  // namespace

const char* role_name(Role r) noexcept {
  switch (r) {
    case Role::device: return "device";
    case Role::verifier: return "verifier";
    case Role::authority: return "authority";
  }
  return "unknown";
}

Bytes Certificate::to_be_signed() const {
  Bytes out;
  out.reserve(kCertificateSize);
  put_bytes(out, as_bytes("EMLC"));
  out.push_back(kCertVersion);
  out.push_back(static_cast<std::uint8_t>(role));
  put_bytes(out, subject_id);
  put_bytes(out, subject_key.octets());
  put_bytes(out, issuer_key.octets());
  return out;
}

Bytes Certificate::encode() const {
  Bytes out = to_be_signed();
  put_bytes(out, signature);
  return out;
}

Certificate Certificate::decode(ByteView data) {
  Reader r(data);
  if (as_chars(r.take(4)) != "EMLC") fail(Errc::parse_error, "certificate: bad magic");
  if (r.u8() != kCertVersion) fail(Errc::parse_error, "certificate: unsupported version");
  Certificate c;
  c.role = parse_role(r.u8());
  auto id = r.take(16);
  std::copy(id.begin(), id.end(), c.subject_id.begin());
  c.subject_key = crypto::PublicKey::from_octets(r.take(crypto::kPublicKeySize));
  c.issuer_key = crypto::PublicKey::from_octets(r.take(crypto::kPublicKeySize));
  auto sig = r.take(crypto::kSignatureSize);
  std::copy(sig.begin(), sig.end(), c.signature.begin());
  r.expect_done();
  return c;
}

std::string Certificate::to_pem() const {
  std::string b64 = crypto::base64_encode(encode());
  std::string out(kPemBegin);
  out += '\n';
  for (std::size_t i = 0; i < b64.size(); i += 64) {
    out += b64.substr(i, 64);
    out += '\n';
  }
  out += kPemEnd;
  out += '\n';
  return out;
}

Certificate Certificate::from_pem(std::string_view text) {
  auto begin = text.find(kPemBegin);
  auto end = text.find(kPemEnd);
  if (begin == std::string_view::npos || end == std::string_view::npos || end < begin)
    fail(Errc::parse_error, "certificate: missing PEM armor");
  auto body = text.substr(begin + kPemBegin.size(), end - begin - kPemBegin.size());
  return decode(crypto::base64_decode(body));
}

bool Certificate::signature_valid() const {
  return issuer_key.valid() && issuer_key.verify(to_be_signed(), signature);
}

TrustAnchors TrustAnchors::load_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) fail(Errc::io_error, "trust anchor directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".pem" || ext == ".cert")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  TrustAnchors anchors;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::stringstream ss;
    ss << in.rdbuf();
    anchors.add(Certificate::from_pem(ss.str()));
  }
  return anchors;
}

bool TrustAnchors::accepts(const Certificate& cert) const {
  for (const auto& a : anchors_) {
    if (cert.issuer_key == a.subject_key && cert.signature_valid()) return true;
  }
  return false;
}

DeviceIdentity DeviceIdentity::create(Role role, const DeviceId& id, const DeviceIdentity* issuer) {
  DeviceIdentity ident;
  ident.key_ = crypto::SigningKey::generate();
  if (issuer == nullptr) {
    ident.cert_.role = role;
    ident.cert_.subject_id = id;
    ident.cert_.subject_key = ident.key_.public_key();
    ident.cert_.issuer_key = ident.key_.public_key();
    ident.cert_.signature = ident.key_.sign(ident.cert_.to_be_signed());
  } else {
    ident.cert_ = issuer->issue(role, id, ident.key_.public_key());
  }
  return ident;
}

DeviceIdentity DeviceIdentity::create(Role role, const DeviceIdentity* issuer) {
  return create(role, random_device_id(), issuer);
}

Certificate DeviceIdentity::issue(Role role, const DeviceId& id, const crypto::PublicKey& subject) const {
  Certificate c;
  c.role = role;
  c.subject_id = id;
  c.subject_key = subject;
  c.issuer_key = key_.public_key();
  c.signature = key_.sign(c.to_be_signed());
  return c;
}

SecretBuffer DeviceIdentity::secret_encode() const {
  SecretBuffer der = key_.to_der();
  Bytes cert = cert_.encode();
  SecretBuffer out(4 + 1 + cert.size() + 4 + der.size());
  Bytes head;
  put_bytes(head, as_bytes("EMLI"));
  head.push_back(kIdentityVersion);
  put_bytes(head, cert);
  put_be32(head, static_cast<std::uint32_t>(der.size()));
  std::copy(head.begin(), head.end(), out.data());
  std::copy(der.data(), der.data() + der.size(), out.data() + head.size());
  return out;
}

DeviceIdentity DeviceIdentity::secret_decode(ByteView data) {
  Reader r(data);
  if (as_chars(r.take(4)) != "EMLI") fail(Errc::parse_error, "identity: bad magic");
  if (r.u8() != kIdentityVersion) fail(Errc::parse_error, "identity: unsupported version");
  DeviceIdentity ident;
  ident.cert_ = Certificate::decode(r.take(kCertificateSize));
  std::uint32_t n = r.be32();
  ident.key_ = crypto::SigningKey::from_der(r.take(n));
  r.expect_done();
  if (!(ident.key_.public_key() == ident.cert_.subject_key))
    fail(Errc::parse_error, "identity: key does not match certificate");
  return ident;
}

DeviceId random_device_id() {
  DeviceId id{};
  crypto::random_fill(id);
  return id;
}

}  // namespace emlog

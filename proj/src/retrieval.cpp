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

#include "retrieval.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

namespace emlog {

namespace {

constexpr std::size_t kNonceSize = 32;
constexpr const char* kServerContext = "EMLOG-HS-SERVER";
constexpr const char* kClientContext = "EMLOG-HS-CLIENT";
constexpr const char* kSummaryContext = "EMLOG-SUMMARY-V1";

bool known_frame(std::uint8_t t) {
  switch (static_cast<FrameType>(t)) {
    case FrameType::client_hello:
    case FrameType::server_hello:
    case FrameType::client_finish:
    case FrameType::request:
    case FrameType::block:
    case FrameType::notice:
    case FrameType::summary:
    case FrameType::alarm:
    case FrameType::ack:
    case FrameType::error:
      return true;
  }
  return false;
}

Errc code_from_byte(std::uint8_t b) {
  if (b == 0 || b > static_cast<std::uint8_t>(Errc::not_found)) return Errc::auth_failure;
  return static_cast<Errc>(b);
}

[[noreturn]] void raise_peer_error(ByteView payload) {
  if (payload.empty()) fail(Errc::auth_failure, "peer aborted");
  std::string text(as_chars(payload.subspan(1)));
  fail(code_from_byte(payload[0]), "peer aborted: " + text);
}

Bytes error_payload(Errc code, std::string_view text) {
  Bytes p;
  p.push_back(static_cast<std::uint8_t>(code));
  put_bytes(p, as_bytes(text.substr(0, 1024)));
  return p;
}

// Reports the failure to the peer, then raises it locally.
[[noreturn]] void abort_handshake(Transport& t, Errc code, const std::string& text) {
  send_error(t, code, text);
  fail(code, text);
}

struct Hello {
  std::uint8_t version = 0;
  Role role = Role::device;
  Certificate cert;
  Bytes nonce;
  Bytes eph;
  Bytes evidence;
  crypto::Signature sig{};  // server hello only
};

Bytes encode_hello(const Hello& h, bool with_sig) {
  Bytes out;
  out.push_back(h.version);
  out.push_back(static_cast<std::uint8_t>(h.role));
  put_bytes(out, h.cert.encode());
  put_bytes(out, h.nonce);
  put_bytes(out, h.eph);
  put_lp_bytes(out, h.evidence);
  if (with_sig) put_bytes(out, h.sig);
  return out;
}

// Reads the version first so a mismatch is reported as such even when the
// rest of the layout is different.
std::uint8_t peek_version(ByteView payload) {
  if (payload.empty()) fail(Errc::parse_error, "empty hello");
  return payload[0];
}

Hello decode_hello(ByteView payload, bool with_sig) {
  Reader r(payload);
  Hello h;
  h.version = r.u8();
  std::uint8_t role = r.u8();
  if (role < 1 || role > 3) fail(Errc::parse_error, "hello: bad role");
  h.role = static_cast<Role>(role);
  h.cert = Certificate::decode(r.take(kCertificateSize));
  h.nonce = r.bytes(kNonceSize);
  h.eph = r.bytes(crypto::kPublicKeySize);
  h.evidence = r.lp_bytes(1u << 16);
  if (with_sig) {
    auto s = r.take(crypto::kSignatureSize);
    std::copy(s.begin(), s.end(), h.sig.begin());
  }
  r.expect_done();
  return h;
}

Bytes handshake_digest(const char* context, std::initializer_list<ByteView> parts) {
  Bytes msg;
  put_bytes(msg, as_bytes(context));
  for (ByteView p : parts) put_bytes(msg, p);
  auto d = crypto::sha256(msg);
  return Bytes(d.begin(), d.end());
}

void check_peer(Transport& t, const Hello& h, Role expected, const HandshakeConfig& cfg) {
  if (h.role != expected || h.cert.role != expected)
    abort_handshake(t, Errc::auth_failure, std::string("peer is not a ") + role_name(expected));
  if (!cfg.anchors || !cfg.anchors->accepts(h.cert))
    abort_handshake(t, Errc::auth_failure, "peer certificate not issued by a trusted anchor");
  if (cfg.attestation.accept && !cfg.attestation.accept(h.evidence, h.cert))
    abort_handshake(t, Errc::auth_failure, "attestation evidence rejected by policy");
}

}  // namespace

// ---- transports --------------------------------------------------------------

void FdTransport::send(ByteView data) {
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(Errc::io_error, std::string("send: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

void FdTransport::recv(std::uint8_t* out, std::size_t n) {
  std::size_t off = 0;
  while (off < n) {
    ssize_t got = ::recv(fd_, out + off, n - off, 0);
    if (got < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) fail(Errc::io_error, "receive timed out");
      fail(Errc::io_error, std::string("recv: ") + std::strerror(errno));
    }
    if (got == 0) fail(Errc::io_error, "connection closed by peer");
    off += static_cast<std::size_t>(got);
  }
}

void FdTransport::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

void FdTransport::set_timeout(int seconds) {
  timeval tv{seconds, 0};
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

std::pair<std::unique_ptr<FdTransport>, std::unique_ptr<FdTransport>> make_pipe() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0)
    fail(Errc::io_error, std::string("socketpair: ") + std::strerror(errno));
  return {std::make_unique<FdTransport>(fds[0]), std::make_unique<FdTransport>(fds[1])};
}

std::unique_ptr<FdTransport> tcp_connect(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res); rc != 0)
    fail(Errc::io_error, "resolve " + host + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (addrinfo* a = res; a; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) fail(Errc::io_error, "cannot connect to " + host + ":" + std::to_string(port));
  auto t = std::make_unique<FdTransport>(fd);
  t->set_timeout(30);
  return t;
}

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res); rc != 0)
    fail(Errc::io_error, "resolve " + host + ": " + ::gai_strerror(rc));
  for (addrinfo* a = res; a; a = a->ai_next) {
    fd_ = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
    if (fd_ < 0) continue;
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd_, a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd_, 16) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) fail(Errc::io_error, "cannot listen on " + host + ":" + std::to_string(port));
  sockaddr_storage ss{};
  socklen_t len = sizeof ss;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&ss), &len);
  port_ = ntohs(ss.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port
                                         : reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<FdTransport> TcpListener::accept() {
  int fd;
  do {
    fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
  } while (fd < 0 && errno == EINTR);
  if (fd < 0) fail(Errc::io_error, std::string("accept: ") + std::strerror(errno));
  auto t = std::make_unique<FdTransport>(fd);
  t->set_timeout(30);
  return t;
}

void TapTransport::send(ByteView data) {
  put_bytes(sent, data);
  inner_.send(data);
  if (replay_send && *replay_send == sends_) inner_.send(data);
  ++sends_;
}

void TapTransport::recv(std::uint8_t* out, std::size_t n) {
  inner_.recv(out, n);
  received.insert(received.end(), out, out + n);
}

void write_frame(Transport& t, FrameType type, ByteView payload) {
  if (payload.size() > kMaxFrameSize) fail(Errc::invalid_parameter, "frame too large");
  Bytes buf;
  buf.reserve(5 + payload.size());
  put_be32(buf, static_cast<std::uint32_t>(payload.size()));
  buf.push_back(static_cast<std::uint8_t>(type));
  put_bytes(buf, payload);
  t.send(buf);
}

Frame read_frame(Transport& t) {
  std::uint8_t hdr[5];
  t.recv(hdr, 5);
  std::uint32_t len = (std::uint32_t{hdr[0]} << 24) | (std::uint32_t{hdr[1]} << 16) | (std::uint32_t{hdr[2]} << 8) | hdr[3];
  if (len > kMaxFrameSize) fail(Errc::parse_error, "frame too large");
  if (!known_frame(hdr[4])) fail(Errc::parse_error, "unknown frame type");
  Frame f;
  f.type = static_cast<FrameType>(hdr[4]);
  f.payload.resize(len);
  if (len) t.recv(f.payload.data(), len);
  return f;
}

void send_error(Transport& t, Errc code, std::string_view text) {
  try {
    write_frame(t, FrameType::error, error_payload(code, text));
  } catch (const Error&) {
    // The peer may already be gone.
  }
}

bool NonceCache::insert(ByteView nonce) {
  std::lock_guard lock(mu_);
  Bytes n(nonce.begin(), nonce.end());
  if (!seen_.insert(n).second) return false;
  order_.push_back(std::move(n));
  if (order_.size() > capacity_) {
    seen_.erase(order_.front());
    order_.pop_front();
  }
  return true;
}

// ---- handshake ---------------------------------------------------------------

void SecureSession::derive(ByteView shared, ByteView transcript_hash, bool is_client) {
  SecretBuffer okm = hkdf(shared, transcript_hash, as_bytes("emlog/v1/session"), 32 + 32 + 12 + 12);
  ByteView v = okm.view();
  Key32 c2s(v.subspan(0, 32)), s2c(v.subspan(32, 32));
  std::array<std::uint8_t, 12> c2s_iv{}, s2c_iv{};
  std::copy_n(v.begin() + 64, 12, c2s_iv.begin());
  std::copy_n(v.begin() + 76, 12, s2c_iv.begin());
  if (is_client) {
    send_key_ = std::move(c2s);
    recv_key_ = std::move(s2c);
    send_iv_ = c2s_iv;
    recv_iv_ = s2c_iv;
  } else {
    send_key_ = std::move(s2c);
    recv_key_ = std::move(c2s);
    send_iv_ = s2c_iv;
    recv_iv_ = c2s_iv;
  }
}

SecureSession SecureSession::client(Transport& t, const HandshakeConfig& cfg) {
  if (!cfg.identity) fail(Errc::invalid_parameter, "client identity missing");
  SecureSession s(t);
  crypto::EphemeralKey eph = crypto::EphemeralKey::generate();
  Hello ch;
  ch.version = cfg.version;
  ch.role = Role::verifier;
  ch.cert = cfg.identity->certificate();
  ch.nonce = crypto::random_bytes(kNonceSize);
  ch.eph.assign(eph.public_octets().begin(), eph.public_octets().end());
  ch.evidence = cfg.attestation.evidence;
  Bytes ch_bytes = encode_hello(ch, false);
  write_frame(t, FrameType::client_hello, ch_bytes);

  Frame f = read_frame(t);
  if (f.type == FrameType::error) raise_peer_error(f.payload);
  if (f.type != FrameType::server_hello) abort_handshake(t, Errc::negotiation_failure, "expected server hello");
  if (peek_version(f.payload) != cfg.version)
    abort_handshake(t, Errc::negotiation_failure, "protocol version mismatch");
  Hello sh;
  try {
    sh = decode_hello(f.payload, true);
  } catch (const Error& e) {
    abort_handshake(t, Errc::negotiation_failure, std::string("malformed server hello: ") + e.what());
  }
  check_peer(t, sh, Role::device, cfg);
  Bytes sh_body(f.payload.begin(), f.payload.end() - crypto::kSignatureSize);
  if (!sh.cert.subject_key.verify(handshake_digest(kServerContext, {ch_bytes, sh_body}), sh.sig))
    abort_handshake(t, Errc::auth_failure, "server transcript signature invalid");

  Bytes cf = [&] {
    auto sig = cfg.identity->sign(handshake_digest(kClientContext, {ch_bytes, f.payload}));
    return Bytes(sig.begin(), sig.end());
  }();
  write_frame(t, FrameType::client_finish, cf);

  SecretBuffer shared = eph.agree(sh.eph);
  auto th = crypto::sha256({ch_bytes, f.payload, cf});
  s.derive(shared.view(), th, true);
  s.peer_ = sh.cert;
  s.peer_evidence_ = sh.evidence;
  return s;
}

SecureSession SecureSession::server(Transport& t, const HandshakeConfig& cfg) {
  if (!cfg.identity) fail(Errc::invalid_parameter, "server identity missing");
  SecureSession s(t);
  Frame f = read_frame(t);
  if (f.type == FrameType::error) raise_peer_error(f.payload);
  if (f.type != FrameType::client_hello) abort_handshake(t, Errc::negotiation_failure, "expected client hello");
  if (peek_version(f.payload) != cfg.version)
    abort_handshake(t, Errc::negotiation_failure, "protocol version mismatch");
  Hello ch;
  try {
    ch = decode_hello(f.payload, false);
  } catch (const Error& e) {
    abort_handshake(t, Errc::negotiation_failure, std::string("malformed client hello: ") + e.what());
  }
  if (cfg.nonces && !cfg.nonces->insert(ch.nonce)) abort_handshake(t, Errc::replay_detected, "client hello replayed");
  check_peer(t, ch, Role::verifier, cfg);
  Bytes ch_bytes = std::move(f.payload);

  crypto::EphemeralKey eph = crypto::EphemeralKey::generate();
  Hello sh;
  sh.version = cfg.version;
  sh.role = Role::device;
  sh.cert = cfg.identity->certificate();
  sh.nonce = crypto::random_bytes(kNonceSize);
  sh.eph.assign(eph.public_octets().begin(), eph.public_octets().end());
  sh.evidence = cfg.attestation.evidence;
  Bytes sh_body = encode_hello(sh, false);
  sh.sig = cfg.identity->sign(handshake_digest(kServerContext, {ch_bytes, sh_body}));
  Bytes sh_bytes = encode_hello(sh, true);
  write_frame(t, FrameType::server_hello, sh_bytes);

  Frame fin = read_frame(t);
  if (fin.type == FrameType::error) raise_peer_error(fin.payload);
  if (fin.type != FrameType::client_finish || fin.payload.size() != crypto::kSignatureSize)
    abort_handshake(t, Errc::negotiation_failure, "expected client finish");
  if (!ch.cert.subject_key.verify(handshake_digest(kClientContext, {ch_bytes, sh_bytes}), fin.payload))
    abort_handshake(t, Errc::auth_failure, "client transcript signature invalid");

  SecretBuffer shared = eph.agree(ch.eph);
  auto th = crypto::sha256({ch_bytes, sh_bytes, fin.payload});
  s.derive(shared.view(), th, false);
  s.peer_ = ch.cert;
  s.peer_evidence_ = ch.evidence;
  return s;
}

namespace {

std::array<std::uint8_t, 12> frame_nonce(const std::array<std::uint8_t, 12>& iv, std::uint64_t seq) {
  std::array<std::uint8_t, 12> n = iv;
  for (int i = 0; i < 8; ++i) n[4 + i] ^= static_cast<std::uint8_t>(seq >> (56 - 8 * i));
  return n;
}

Bytes frame_aad(FrameType type, std::uint64_t seq) {
  Bytes aad;
  aad.push_back(static_cast<std::uint8_t>(type));
  put_be64(aad, seq);
  return aad;
}

}  // namespace

void SecureSession::send(FrameType type, ByteView payload) {
  if (send_seq_ == UINT64_MAX) fail(Errc::crypto_failure, "session sequence exhausted");
  std::uint64_t seq = send_seq_++;
  Bytes out;
  put_be64(out, seq);
  put_bytes(out, crypto::gcm_encrypt(send_key_.view(), frame_nonce(send_iv_, seq), frame_aad(type, seq), payload));
  write_frame(*t_, type, out);
}

Frame SecureSession::recv() {
  Frame f = read_frame(*t_);
  if (f.payload.size() < 8 + crypto::kGcmTagSize) fail(Errc::auth_failure, "frame outside the session");
  Reader r(f.payload);
  std::uint64_t seq = r.be64();
  ByteView ct = r.take(r.remaining());
  SecretBuffer plain = crypto::gcm_decrypt(recv_key_.view(), frame_nonce(recv_iv_, seq), frame_aad(f.type, seq), ct);
  if (seq < recv_seq_) fail(Errc::replay_detected, "frame " + std::to_string(seq) + " replayed");
  if (seq > recv_seq_) fail(Errc::auth_failure, "frame out of sequence");
  ++recv_seq_;
  Frame out{f.type, Bytes(plain.view().begin(), plain.view().end())};
  if (out.type == FrameType::error) raise_peer_error(out.payload);
  return out;
}

// ---- request / summary -------------------------------------------------------

Bytes RetrievalRequest::encode() const {
  Bytes out;
  put_be32(out, first);
  put_be32(out, last);
  out.push_back(mode == VerifyMode::full ? 1 : 0);
  return out;
}

RetrievalRequest RetrievalRequest::decode(ByteView data) {
  Reader r(data);
  RetrievalRequest q;
  q.first = r.be32();
  q.last = r.be32();
  std::uint8_t m = r.u8();
  if (m > 1) fail(Errc::parse_error, "request: bad mode");
  q.mode = m ? VerifyMode::full : VerifyMode::public_only;
  r.expect_done();
  if (q.first > q.last) fail(Errc::invalid_parameter, "request: first > last");
  return q;
}

Bytes TransferSummary::signed_preimage() const {
  Bytes out;
  put_bytes(out, as_bytes(kSummaryContext));
  out.push_back(state ? 1 : 0);
  if (state) put_bytes(out, state->signing_preimage());
  put_be32(out, params.c);
  put_be32(out, params.m);
  put_be32(out, blocks_sent);
  return out;
}

Bytes TransferSummary::encode() const {
  Bytes out;
  out.push_back(state ? 1 : 0);
  if (state) put_bytes(out, state->encode());
  put_be32(out, params.c);
  put_be32(out, params.m);
  put_be32(out, blocks_sent);
  put_bytes(out, signature);
  return out;
}

TransferSummary TransferSummary::decode(ByteView data) {
  Reader r(data);
  TransferSummary s;
  std::uint8_t has = r.u8();
  if (has > 1) fail(Errc::parse_error, "summary: bad flag");
  if (has) s.state = ChainState::decode(r.take(kChainStateSize));
  std::uint32_t c = r.be32();
  std::uint32_t m = r.be32();
  s.params = ChainParams::make(c, m);
  s.blocks_sent = r.be32();
  auto sig = r.take(crypto::kSignatureSize);
  std::copy(sig.begin(), sig.end(), s.signature.begin());
  r.expect_done();
  return s;
}

// ---- device server -------------------------------------------------------------

DeviceServer::DeviceServer(LogDevice& device, TrustAnchors anchors, ServeOptions opts)
    : device_(device), anchors_(std::move(anchors)), opts_(std::move(opts)) {}

ServeResult DeviceServer::serve(Transport& t) {
  ServeResult r;
  try {
    HandshakeConfig cfg;
    cfg.identity = &device_.identity();
    cfg.anchors = &anchors_;
    cfg.attestation = opts_.attestation;
    cfg.nonces = &nonces_;
    SecureSession s = SecureSession::server(t, cfg);
    r.peer = s.peer();

    Frame f = s.recv();
    if (f.type != FrameType::request) fail(Errc::negotiation_failure, "expected a request");
    RetrievalRequest req = RetrievalRequest::decode(f.payload);

    SealedStore& store = device_.store();
    const std::optional<ChainState> state = store.state();
    std::optional<std::uint32_t> latest = state ? state->latest() : std::nullopt;
    if (!state) {
      // Without a state the device cannot say where the log ends; send what is on disk.
      auto ids = store.block_ids();
      if (!ids.empty()) latest = ids.back();
      r.audit_events.push_back("chain state missing");
    }

    std::uint32_t last = req.last;
    if (latest && last > *latest) {
      if (req.last != kRangeOpenEnd) {
        Bytes notice;
        put_be32(notice, req.last);
        put_be32(notice, *latest);
        s.send(FrameType::notice, notice);
        r.clamped_to = *latest;
      }
      last = *latest;
    }

    std::optional<std::uint32_t> last_sent;
    if (latest && req.first <= last) {
      for (std::uint64_t id = req.first; id <= last; ++id) {
        auto bid = static_cast<std::uint32_t>(id);
        Block b;
        try {
          b = store.load_block(bid);
        } catch (const Error& e) {
          if (e.code() == Errc::not_found) {
            r.audit_events.push_back("block " + std::to_string(bid) + " missing from store");
            continue;
          }
          Bytes alarm;
          put_be32(alarm, bid);
          alarm.push_back(static_cast<std::uint8_t>(e.code()));
          put_bytes(alarm, as_bytes(e.what()));
          s.send(FrameType::alarm, alarm);
          r.alarm_block = bid;
          r.detail = "sealed block " + std::to_string(bid) + " failed to unseal: " + e.what();
          r.audit_events.push_back("integrity alarm: " + r.detail);
          break;
        }
        s.send(FrameType::block, b.serialize());
        ++r.blocks_sent;
        last_sent = bid;
      }
    }

    TransferSummary sum;
    sum.state = state;
    sum.params = device_.params();
    sum.blocks_sent = r.blocks_sent;
    sum.signature = device_.identity().sign(sum.signed_preimage());
    s.send(FrameType::summary, sum.encode());

    Frame ack = s.recv();
    if (ack.type != FrameType::ack) fail(Errc::negotiation_failure, "expected an acknowledgement");
    Reader ar(ack.payload);
    std::uint32_t received = ar.be32();
    r.acknowledged = received == r.blocks_sent;
    if (r.alarm_block) {
      // The stream was cut short; nothing is recorded as delivered.
      r.error = Errc::integrity_alarm;
    } else if (r.acknowledged && opts_.record_delivery && last_sent && state) {
      store.mark_delivered(*last_sent);
    }
  } catch (const Error& e) {
    r.error = e.code();
    r.detail = e.what();
  }
  return r;
}

// ---- verifier client -----------------------------------------------------------

FetchResult fetch(Transport& t, const DeviceIdentity& verifier, const TrustAnchors& anchors,
                  const RetrievalRequest& request, FetchOptions opts) {
  FetchResult r;
  r.request = request;
  try {
    HandshakeConfig cfg;
    cfg.identity = &verifier;
    cfg.anchors = &anchors;
    cfg.attestation = opts.attestation;
    cfg.version = opts.version;
    SecureSession s = SecureSession::client(t, cfg);
    r.device_cert = s.peer();
    s.send(FrameType::request, request.encode());
    for (;;) {
      Frame f = s.recv();
      if (f.type == FrameType::block) {
        r.blocks.push_back(Block::parse(f.payload));
      } else if (f.type == FrameType::notice) {
        Reader nr(f.payload);
        nr.be32();
        r.clamped_to = nr.be32();
      } else if (f.type == FrameType::alarm) {
        Reader ar(f.payload);
        std::uint32_t id = ar.be32();
        ar.u8();
        r.alarm = std::make_pair(id, std::string(as_chars(ar.take(ar.remaining()))));
        r.error = Errc::integrity_alarm;
        r.detail = "device raised an integrity alarm at block " + std::to_string(id);
      } else if (f.type == FrameType::summary) {
        r.summary = TransferSummary::decode(f.payload);
        Bytes ack;
        put_be32(ack, static_cast<std::uint32_t>(r.blocks.size()));
        s.send(FrameType::ack, ack);
        break;
      } else {
        fail(Errc::negotiation_failure, "unexpected frame from device");
      }
    }
  } catch (const Error& e) {
    r.error = e.code();
    r.detail = e.what();
  }
  return r;
}

// ---- archive -------------------------------------------------------------------

Bytes encode_archive(const FetchResult& r) {
  Bytes out;
  put_bytes(out, as_bytes("EMLA"));
  out.push_back(1);
  std::uint8_t flags = (r.device_cert ? 1 : 0) | (r.summary ? 2 : 0) | (r.clamped_to ? 4 : 0) | (r.alarm ? 8 : 0);
  out.push_back(flags);
  put_bytes(out, r.request.encode());
  if (r.device_cert) put_bytes(out, r.device_cert->encode());
  if (r.summary) put_lp_bytes(out, r.summary->encode());
  if (r.clamped_to) put_be32(out, *r.clamped_to);
  if (r.alarm) {
    put_be32(out, r.alarm->first);
    put_lp_bytes(out, as_bytes(r.alarm->second));
  }
  put_be32(out, static_cast<std::uint32_t>(r.blocks.size()));
  for (const auto& b : r.blocks) put_lp_bytes(out, b.serialize());
  return out;
}

FetchResult decode_archive(ByteView data) {
  Reader rd(data);
  if (as_chars(rd.take(4)) != "EMLA") fail(Errc::parse_error, "archive: bad magic");
  if (rd.u8() != 1) fail(Errc::parse_error, "archive: unsupported version");
  std::uint8_t flags = rd.u8();
  if (flags & 0xF0) fail(Errc::parse_error, "archive: unknown flags");
  FetchResult r;
  r.request = RetrievalRequest::decode(rd.take(9));
  if (flags & 1) r.device_cert = Certificate::decode(rd.take(kCertificateSize));
  if (flags & 2) r.summary = TransferSummary::decode(rd.lp_bytes(1024));
  if (flags & 4) r.clamped_to = rd.be32();
  if (flags & 8) {
    std::uint32_t id = rd.be32();
    Bytes text = rd.lp_bytes(1 << 16);
    r.alarm = std::make_pair(id, std::string(text.begin(), text.end()));
  }
  std::uint32_t n = rd.be32();
  for (std::uint32_t i = 0; i < n; ++i) r.blocks.push_back(Block::parse(rd.lp_bytes(kMaxFrameSize)));
  rd.expect_done();
  return r;
}

// ---- audit -----------------------------------------------------------------------

VerificationReport audit(const FetchResult& r, const RootLoggingKey* rlk) {
  VerificationReport bad;
  if (!r.device_cert) {
    bad.ok = false;
    bad.notes.push_back("no authenticated device certificate; transfer failed: " + r.detail);
    return bad;
  }
  const crypto::PublicKey& pk = r.device_cert->subject_key;

  std::optional<ChainState> state;
  // Without a trusted summary m is unknown, so block length is not bounded.
  ChainParams params = ChainParams::make(1, UINT32_MAX);
  std::vector<std::string> notes;
  bool summary_ok = false;
  if (r.summary) {
    summary_ok = pk.verify(r.summary->signed_preimage(), r.summary->signature);
    if (summary_ok) {
      state = r.summary->state;
      params = r.summary->params;
    } else {
      notes.push_back("transfer summary signature invalid");
    }
  } else {
    notes.push_back("no transfer summary received");
  }

  const RootLoggingKey* key = rlk;
  if (rlk && !summary_ok) {
    notes.push_back("chain parameters unknown; full verification skipped");
    key = nullptr;
  }

  std::vector<SequenceItem> items;
  for (const auto& b : r.blocks) items.push_back({b.block_id, b, BlockStatus::ok, {}});
  if (r.alarm) items.push_back({r.alarm->first, std::nullopt, BlockStatus::seal_failure, r.alarm->second});

  SequenceCheck chk;
  chk.expected_start = r.request.first;
  chk.state = state;
  if (r.request.last != kRangeOpenEnd) chk.range_end = r.request.last;
  chk.rlk = key;
  chk.params = params;
  chk.pk = pk;
  VerificationReport rep = verify_sequence(items, chk);

  if (summary_ok && r.summary->blocks_sent != r.blocks.size()) {
    Finding f;
    f.block_id = r.blocks.empty() ? r.request.first : r.blocks.back().block_id;
    f.status = BlockStatus::state_mismatch;
    f.detail = "device reported " + std::to_string(r.summary->blocks_sent) + " blocks sent, received " +
               std::to_string(r.blocks.size());
    rep.add(f);
  }
  if (r.error && !r.alarm) {
    rep.ok = false;
    notes.push_back("transfer ended with " + std::string(errc_name(*r.error)) + ": " + r.detail);
  }
  for (auto& n : notes) rep.notes.push_back(std::move(n));
  return rep;
}

VerificationReport audit_store(const SealedStore& store, const crypto::PublicKey& pk, const RootLoggingKey* rlk) {
  std::vector<SequenceItem> items;
  for (std::uint32_t id : store.block_ids()) {
    SequenceItem it;
    it.block_id = id;
    try {
      it.block = store.load_block(id);
    } catch (const Error& e) {
      it.load_status = e.code() == Errc::parse_error ? BlockStatus::parse_error : BlockStatus::seal_failure;
      it.detail = e.what();
    }
    items.push_back(std::move(it));
  }
  SequenceCheck chk;
  chk.state = store.state();
  chk.rlk = rlk;
  chk.params = store.manifest().params;
  chk.pk = pk;
  return verify_sequence(items, chk);
}

}  // namespace emlog

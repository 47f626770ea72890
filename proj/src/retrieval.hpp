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

// Device-to-verifier retrieval: framed transport, mutually authenticated
// handshake with ephemeral ECDH, AEAD-protected session frames, range
// export from the sealed store, archives and audit.
//
// Frame:  BE32 length | type(1) | payload(length)
// The full wire grammar is in PROTOCOL.md.

#ifndef EMLOG_RETRIEVAL_HPP
#define EMLOG_RETRIEVAL_HPP

#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "collector.hpp"

namespace emlog {

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kMaxFrameSize = 64u << 20;
inline constexpr std::uint32_t kRangeOpenEnd = 0xFFFFFFFF;

enum class FrameType : std::uint8_t {
  client_hello = 0x01,
  server_hello = 0x02,
  client_finish = 0x03,
  request = 0x10,
  block = 0x11,
  notice = 0x12,
  summary = 0x13,
  alarm = 0x14,
  ack = 0x15,
  error = 0x7F,
};

// ---- transports --------------------------------------------------------------

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(ByteView data) = 0;
  // Reads exactly n bytes; io_error on end of stream.
  virtual void recv(std::uint8_t* out, std::size_t n) = 0;
  virtual void close() = 0;
};

/// Stream socket (TCP or a local socketpair).
class FdTransport : public Transport {
 public:
  explicit FdTransport(int fd) : fd_(fd) {}
  ~FdTransport() override { close(); }
  FdTransport(const FdTransport&) = delete;
  FdTransport& operator=(const FdTransport&) = delete;

  void send(ByteView data) override;
  void recv(std::uint8_t* out, std::size_t n) override;
  void close() override;
  void set_timeout(int seconds);

 private:
  int fd_;
};

// Connected in-process pair.
std::pair<std::unique_ptr<FdTransport>, std::unique_ptr<FdTransport>> make_pipe();

std::unique_ptr<FdTransport> tcp_connect(const std::string& host, std::uint16_t port);

class TcpListener {
 public:
  // port 0 picks a free port.
  TcpListener(const std::string& host, std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;
  std::uint16_t port() const { return port_; }
  std::unique_ptr<FdTransport> accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Records every byte in both directions; used to check nothing leaks.
class TapTransport : public Transport {
 public:
  explicit TapTransport(Transport& inner) : inner_(inner) {}
  void send(ByteView data) override;
  void recv(std::uint8_t* out, std::size_t n) override;
  void close() override { inner_.close(); }

  Bytes sent, received;
  // When set, the send call with this index (0-based) is transmitted twice.
  std::optional<std::size_t> replay_send;

 private:
  Transport& inner_;
  std::size_t sends_ = 0;
};

struct Frame {
  FrameType type = FrameType::error;
  Bytes payload;
};

// One send() per frame.
void write_frame(Transport& t, FrameType type, ByteView payload);
Frame read_frame(Transport& t);  // parse_error on an oversize or unknown frame

// ---- handshake and session -------------------------------------------------

/// Attestation evidence is carried but not interpreted; a policy decides.
struct AttestationPolicy {
  Bytes evidence;  // what this side presents
  std::function<bool(ByteView evidence, const Certificate& peer)> accept;  // empty: accept all
};

/// Remembers client hello nonces so a recorded hello cannot be played again.
class NonceCache {
 public:
  explicit NonceCache(std::size_t capacity = 4096) : capacity_(capacity) {}
  // false when seen before.
  bool insert(ByteView nonce);

 private:
  std::mutex mu_;
  std::set<Bytes> seen_;
  std::deque<Bytes> order_;
  std::size_t capacity_;
};

struct HandshakeConfig {
  const DeviceIdentity* identity = nullptr;
  const TrustAnchors* anchors = nullptr;
  AttestationPolicy attestation;
  NonceCache* nonces = nullptr;        // server side
  std::uint8_t version = kProtocolVersion;
};

/// An established channel. Frames are AES-256-GCM sealed with per-direction
/// keys; each carries a BE64 sequence number that must be exactly the next
/// one expected. A lower number is replay_detected.
class SecureSession {
 public:
  static SecureSession client(Transport& t, const HandshakeConfig& cfg);
  static SecureSession server(Transport& t, const HandshakeConfig& cfg);

  void send(FrameType type, ByteView payload);
  Frame recv();

  const Certificate& peer() const { return peer_; }
  ByteView peer_evidence() const { return peer_evidence_; }

 private:
  SecureSession(Transport& t) : t_(&t) {}
  void derive(ByteView shared, ByteView transcript_hash, bool is_client);

  Transport* t_;
  Certificate peer_;
  Bytes peer_evidence_;
  Key32 send_key_, recv_key_;
  std::array<std::uint8_t, 12> send_iv_{}, recv_iv_{};
  std::uint64_t send_seq_ = 0, recv_seq_ = 0;
};

// Sent in an error frame before aborting; the peer raises the same code.
void send_error(Transport& t, Errc code, std::string_view text);

// ---- retrieval ---------------------------------------------------------------

enum class VerifyMode { public_only, full };

struct RetrievalRequest {
  std::uint32_t first = 0;
  std::uint32_t last = kRangeOpenEnd;  // inclusive; kRangeOpenEnd: everything since first
  VerifyMode mode = VerifyMode::public_only;

  Bytes encode() const;
  static RetrievalRequest decode(ByteView data);
};

/// End-of-transfer summary, signed by the device.
struct TransferSummary {
  std::optional<ChainState> state;
  ChainParams params;
  std::uint32_t blocks_sent = 0;
  crypto::Signature signature{};

  Bytes signed_preimage() const;
  Bytes encode() const;
  static TransferSummary decode(ByteView data);
};

struct ServeResult {
  std::optional<Certificate> peer;
  std::uint32_t blocks_sent = 0;
  std::optional<std::uint32_t> clamped_to;
  std::optional<std::uint32_t> alarm_block;
  bool acknowledged = false;
  std::optional<Errc> error;
  std::string detail;
  std::vector<std::string> audit_events;
};

struct ServeOptions {
  AttestationPolicy attestation;
  bool record_delivery = true;  // advance the delivered watermark on ack
};

/// Device side. Sessions are handled one at a time per call to serve().
class DeviceServer {
 public:
  DeviceServer(LogDevice& device, TrustAnchors anchors, ServeOptions opts = {});
  // Never throws for protocol failures; they are reported in the result.
  ServeResult serve(Transport& t);

 private:
  LogDevice& device_;
  TrustAnchors anchors_;
  ServeOptions opts_;
  NonceCache nonces_;
};

struct FetchResult {
  std::optional<Certificate> device_cert;
  RetrievalRequest request;
  std::vector<Block> blocks;
  std::optional<TransferSummary> summary;
  std::optional<std::uint32_t> clamped_to;
  std::optional<std::pair<std::uint32_t, std::string>> alarm;
  std::optional<Errc> error;
  std::string detail;
};

struct FetchOptions {
  AttestationPolicy attestation;
  std::uint8_t version = kProtocolVersion;
};

// Verifier side. Never throws for protocol failures.
FetchResult fetch(Transport& t, const DeviceIdentity& verifier, const TrustAnchors& anchors,
                  const RetrievalRequest& request, FetchOptions opts = {});

/// A fetched transfer kept on disk for later audit (.emla).
Bytes encode_archive(const FetchResult& r);
FetchResult decode_archive(ByteView data);

/// Public mode when rlk is null. Checks the summary signature against the
/// device certificate, contiguity from request.first, truncation against the
/// signed state and any alarm raised during transfer.
VerificationReport audit(const FetchResult& r, const RootLoggingKey* rlk);

/// Verifies a local store directly (no transfer).
VerificationReport audit_store(const SealedStore& store, const crypto::PublicKey& pk, const RootLoggingKey* rlk);

}  // namespace emlog

#endif  // EMLOG_RETRIEVAL_HPP

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

// extern "C" surface over the C++ core. Exceptions never cross it.

#include "emlog/emlog.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bench.hpp"
#include "json.hpp"
#include "retrieval.hpp"

using namespace emlog;
namespace fs = std::filesystem;
using json = nlohmann::json;

struct emlog_device {
  LogDevice dev;
};

struct emlog_identity {
  DeviceIdentity id;
};

namespace {

thread_local std::string g_last_error;

template <class F>
emlog_status guard(F&& f) {
  g_last_error.clear();
  try {
    f();
    return EMLOG_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<emlog_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return EMLOG_E_INTERNAL;
  } catch (const fs::filesystem_error& e) {
    g_last_error = e.what();
    return EMLOG_E_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EMLOG_E_INTERNAL;
  }
}

void require(bool cond, const char* what) {
  if (!cond) fail(Errc::invalid_parameter, what);
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void set_out(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

Bytes read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot read " + p.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_all(const fs::path& p, ByteView data, bool private_file) {
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io_error, "cannot write " + p.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) fail(Errc::io_error, "cannot write " + p.string());
  }
  if (private_file) fs::permissions(tmp, fs::perms::owner_read | fs::perms::owner_write);
  fs::rename(tmp, p);
}

RootLoggingKey load_provisioned_rlk(const char* rlk_path, const char* key_path) {
  require(rlk_path && key_path, "full verification needs both the sealed root logging key and the provisioning key");
  Bytes key = read_all(key_path);
  if (key.size() != 32) fail(Errc::parse_error, "provisioning key must be 32 bytes");
  RootLoggingKey rlk = open_verifier_rlk(read_all(rlk_path), key);
  secure_wipe(key.data(), key.size());
  return rlk;
}

std::string with_notes(VerificationReport& rep, const std::vector<std::string>& notes) {
  for (const auto& n : notes) rep.notes.push_back(n);
  return rep.to_json();
}

json stats_json(const DeviceStats& s) {
  return json{{"records", s.records},
              {"blocks_signed", s.blocks_signed},
              {"blocks_committed", s.blocks_committed},
              {"commits", s.commits},
              {"epoch_flushes", s.epoch_flushes},
              {"unsealed_records", s.unsealed_records},
              {"unsealed_bytes", s.unsealed_bytes},
              {"max_unsealed_records", s.max_unsealed_records},
              {"max_unsealed_bytes", s.max_unsealed_bytes}};
}

}  // namespace

extern "C" {

const char* emlog_version(void) { return "1.0.0"; }

const char* emlog_status_name(emlog_status status) {
  if (status == EMLOG_E_INTERNAL) return "internal-error";
  if (status < 0 || status > EMLOG_E_NOT_FOUND) return "unknown";
  return errc_name(static_cast<Errc>(status));
}

const char* emlog_last_error(void) { return g_last_error.c_str(); }

void emlog_free(void* p) { std::free(p); }

// ---- identities ----------------------------------------------------------------

emlog_status emlog_identity_create(const char* dir, emlog_role role, const char* issuer_dir) {
  return guard([&] {
    require(dir, "dir is required");
    require(role >= EMLOG_ROLE_DEVICE && role <= EMLOG_ROLE_AUTHORITY, "unknown role");
    std::optional<DeviceIdentity> issuer;
    if (issuer_dir) issuer = load_identity_dir(issuer_dir);
    DeviceIdentity id = DeviceIdentity::create(static_cast<Role>(role), random_device_id(), issuer ? &*issuer : nullptr);
    save_identity_dir(dir, id);
  });
}

emlog_status emlog_identity_open(const char* dir, emlog_identity** out) {
  return guard([&] {
    require(dir && out, "dir and out are required");
    *out = new emlog_identity{load_identity_dir(dir)};
  });
}

emlog_status emlog_identity_certificate_pem(const emlog_identity* id, char** pem) {
  return guard([&] {
    require(id && pem, "identity and out are required");
    *pem = dup_string(id->id.certificate().to_pem());
  });
}

void emlog_identity_close(emlog_identity* id) { delete id; }

emlog_status emlog_provision_key_create(const char* path) {
  return guard([&] {
    require(path, "path is required");
    if (fs::exists(path)) fail(Errc::already_exists, std::string("refusing to overwrite ") + path);
    Bytes k = crypto::random_bytes(32);
    write_all(path, k, true);
    secure_wipe(k.data(), k.size());
  });
}

// ---- device --------------------------------------------------------------------

emlog_status emlog_device_init(const char* dir, uint32_t c, uint32_t m, const char* issuer_dir,
                               uint32_t epoch_seconds, emlog_device** out) {
  return guard([&] {
    require(dir && out, "dir and out are required");
    std::optional<DeviceIdentity> issuer;
    if (issuer_dir) issuer = load_identity_dir(issuer_dir);
    DeviceOptions o;
    if (epoch_seconds) o.epoch_seconds = epoch_seconds;
    *out = new emlog_device{LogDevice::init(dir, ChainParams::make(c, m), o, issuer ? &*issuer : nullptr)};
  });
}

emlog_status emlog_device_open(const char* dir, uint32_t epoch_seconds, emlog_device** out) {
  return guard([&] {
    require(dir && out, "dir and out are required");
    DeviceOptions o;
    if (epoch_seconds) o.epoch_seconds = epoch_seconds;
    *out = new emlog_device{LogDevice::open(dir, o)};
  });
}

emlog_status emlog_device_append(emlog_device* dev, const uint8_t* data, size_t len) {
  return guard([&] {
    require(dev && (data || len == 0), "device and data are required");
    dev->dev.append(ByteView(data, len));
  });
}

emlog_status emlog_device_flush(emlog_device* dev) {
  return guard([&] {
    require(dev, "device is required");
    dev->dev.flush();
  });
}

emlog_status emlog_device_tick(emlog_device* dev, int* flushed) {
  return guard([&] {
    require(dev, "device is required");
    bool f = dev->dev.tick();
    if (flushed) *flushed = f ? 1 : 0;
  });
}

emlog_status emlog_device_stats_json(const emlog_device* dev, char** out) {
  return guard([&] {
    require(dev && out, "device and out are required");
    json j = stats_json(dev->dev.stats());
    const auto& st = dev->dev.store().state();
    j["next_block"] = dev->dev.next_block_id();
    j["c"] = dev->dev.params().c;
    j["m"] = dev->dev.params().m;
    if (st && st->has_blocks) j["latest_block"] = st->latest_block;
    *out = dup_string(j.dump(2));
  });
}

emlog_status emlog_device_certificate_pem(const emlog_device* dev, char** pem) {
  return guard([&] {
    require(dev && pem, "device and out are required");
    *pem = dup_string(dev->dev.certificate().to_pem());
  });
}

emlog_status emlog_device_export_rlk(const emlog_device* dev, const char* provision_key_path, const char* out_path) {
  return guard([&] {
    require(dev && provision_key_path && out_path, "device, key path and output path are required");
    Bytes key = read_all(provision_key_path);
    if (key.size() != 32) fail(Errc::parse_error, "provisioning key must be 32 bytes");
    write_all(out_path, dev->dev.export_rlk(key), true);
    secure_wipe(key.data(), key.size());
  });
}

emlog_status emlog_device_ingest(emlog_device* dev, const char* path, const char* source, int drop_when_full,
                                 size_t queue_capacity, char** report_json) {
  return guard([&] {
    require(dev && path && source, "device, path and source are required");
    auto src = source_from_name(source);
    require(src.has_value(), "unknown source; use apache, snort, dmesg or generic");
    QueueFull mode = drop_when_full ? QueueFull::drop : QueueFull::block;
    std::size_t cap = queue_capacity ? queue_capacity : 4096;
    IngestStats st;
    if (std::strcmp(path, "-") == 0) {
      st = ingest(dev->dev, std::cin, *src, mode, cap);
    } else {
      std::ifstream in(path, std::ios::binary);
      if (!in) fail(Errc::io_error, std::string("cannot read ") + path);
      st = ingest(dev->dev, in, *src, mode, cap);
    }
    set_out(report_json, st.to_json());
  });
}

emlog_status emlog_device_serve(emlog_device* dev, const char* host, uint16_t port, const char* anchors_dir,
                                uint32_t max_sessions, emlog_listening_fn on_listening, emlog_session_fn on_session,
                                void* ctx) {
  return guard([&] {
    require(dev && host && anchors_dir, "device, host and anchors are required");
    TrustAnchors anchors = TrustAnchors::load_dir(anchors_dir);
    if (anchors.empty()) fail(Errc::invalid_parameter, std::string("no trust anchors in ") + anchors_dir);
    DeviceServer server(dev->dev, std::move(anchors));
    TcpListener listener(host, port);
    if (on_listening) on_listening(listener.port(), ctx);
    for (std::uint32_t n = 0; max_sessions == 0 || n < max_sessions; ++n) {
      auto conn = listener.accept();
      ServeResult r = server.serve(*conn);
      conn->close();
      if (on_session) {
        json j{{"blocks_sent", r.blocks_sent}, {"acknowledged", r.acknowledged}, {"events", r.audit_events}};
        if (r.peer) j["peer"] = to_hex(r.peer->subject_id);
        if (r.clamped_to) j["clamped_to"] = *r.clamped_to;
        if (r.alarm_block) j["alarm_block"] = *r.alarm_block;
        if (r.error) {
          j["error"] = errc_name(*r.error);
          j["detail"] = r.detail;
        }
        on_session(j.dump().c_str(), ctx);
      }
    }
  });
}

void emlog_device_close(emlog_device* dev) { delete dev; }

// ---- verifier ------------------------------------------------------------------

emlog_status emlog_fetch(const emlog_identity* verifier, const char* anchors_dir, const char* host, uint16_t port,
                         uint32_t first, uint32_t last, const char* archive_path, char** report_json) {
  return guard([&] {
    require(verifier && anchors_dir && host && archive_path, "verifier, anchors, host and archive are required");
    require(first <= last, "first must not exceed last");
    TrustAnchors anchors = TrustAnchors::load_dir(anchors_dir);
    if (anchors.empty()) fail(Errc::invalid_parameter, std::string("no trust anchors in ") + anchors_dir);
    auto conn = tcp_connect(host, port);
    FetchResult r = fetch(*conn, verifier->id, anchors, RetrievalRequest{first, last, VerifyMode::public_only});
    conn->close();

    json j{{"blocks", r.blocks.size()}, {"first", first}};
    j["last"] = last == kRangeOpenEnd ? json(nullptr) : json(last);
    if (r.device_cert) j["device"] = to_hex(r.device_cert->subject_id);
    if (r.clamped_to) j["clamped_to"] = *r.clamped_to;
    if (r.alarm) j["alarm"] = json{{"block", r.alarm->first}, {"detail", r.alarm->second}};
    if (r.summary && r.summary->state && r.summary->state->has_blocks) j["device_latest"] = r.summary->state->latest_block;
    if (r.device_cert) {
      write_all(archive_path, encode_archive(r), false);
      j["archive"] = archive_path;
    }
    if (r.error) {
      j["error"] = errc_name(*r.error);
      j["detail"] = r.detail;
    }
    set_out(report_json, j.dump(2));
    if (r.error) fail(*r.error, r.detail);
  });
}

emlog_status emlog_verify_store(const char* dir, int full, const char* rlk_path, const char* provision_key_path,
                                int* verdict_ok, char** report_json) {
  return guard([&] {
    require(dir, "dir is required");
    fs::path d(dir);
    Key32 root = load_root_key(d / "hw_root.key");
    SealedStore store = SealedStore::open(d, StorageKey::derive(root.view(), as_bytes(DeviceOptions{}.app_id)));
    SecretBuffer secret = store.read_secret();
    if (secret.size() < 32) fail(Errc::integrity_alarm, "sealed secret too short");
    DeviceIdentity id = DeviceIdentity::secret_decode(secret.view().subspan(32));
    std::optional<RootLoggingKey> rlk;
    std::vector<std::string> notes;
    if (full) {
      if (rlk_path || provision_key_path) {
        rlk = load_provisioned_rlk(rlk_path, provision_key_path);
      } else {
        rlk.emplace(secret.view().first(32));
        notes.push_back("root logging key taken from the store's own sealed secret");
      }
    }
    VerificationReport rep = audit_store(store, id.public_key(), rlk ? &*rlk : nullptr);
    if (verdict_ok) *verdict_ok = rep.ok ? 1 : 0;
    set_out(report_json, with_notes(rep, notes));
  });
}

emlog_status emlog_verify_archive(const char* archive_path, const char* anchors_dir, int full, const char* rlk_path,
                                  const char* provision_key_path, int* verdict_ok, char** report_json) {
  return guard([&] {
    require(archive_path, "archive is required");
    FetchResult r = decode_archive(read_all(archive_path));
    std::vector<std::string> notes;
    if (!r.device_cert) fail(Errc::parse_error, "archive carries no device certificate");
    if (anchors_dir) {
      TrustAnchors anchors = TrustAnchors::load_dir(anchors_dir);
      if (!anchors.accepts(*r.device_cert))
        fail(Errc::auth_failure, "archive device certificate is not issued by a trusted anchor");
    } else {
      notes.push_back("device certificate not checked against trust anchors");
    }
    std::optional<RootLoggingKey> rlk;
    if (full) rlk = load_provisioned_rlk(rlk_path, provision_key_path);
    VerificationReport rep = audit(r, rlk ? &*rlk : nullptr);
    if (verdict_ok) *verdict_ok = rep.ok ? 1 : 0;
    set_out(report_json, with_notes(rep, notes));
  });
}

// ---- tools -----------------------------------------------------------------------

emlog_status emlog_gen_synthetic(const char* path, uint64_t count, double mean, double stddev, uint64_t seed) {
  return guard([&] {
    require(path, "path is required");
    SyntheticSpec spec{count, mean, stddev, seed};
    if (std::strcmp(path, "-") == 0) {
      write_synthetic(spec, std::cout);
      std::cout.flush();
      return;
    }
    std::ostringstream buf;
    write_synthetic(spec, buf);
    const std::string s = buf.str();
    write_all(path, as_bytes(s), false);
  });
}

emlog_status emlog_bench(const char* config_json, int* passed, char** report_json) {
  return guard([&] {
    BenchConfig cfg = config_json ? BenchConfig::from_json(config_json) : BenchConfig{};
    BenchReport rep = bench_grid(cfg);
    if (passed) *passed = rep.passed() ? 1 : 0;
    set_out(report_json, rep.to_json());
  });
}

emlog_status emlog_formats_json(char** out) {
  return guard([&] {
    require(out, "out is required");
    json frames = json::object();
    for (auto [name, t] : std::initializer_list<std::pair<const char*, FrameType>>{
             {"client_hello", FrameType::client_hello},
             {"server_hello", FrameType::server_hello},
             {"client_finish", FrameType::client_finish},
             {"request", FrameType::request},
             {"block", FrameType::block},
             {"notice", FrameType::notice},
             {"summary", FrameType::summary},
             {"alarm", FrameType::alarm},
             {"ack", FrameType::ack},
             {"error", FrameType::error}})
      frames[name] = static_cast<int>(t);
    json j{{"kdf_salt_hex", to_hex(kSchemeSalt)},
           {"text_field_bytes", kTextFieldSize},
           {"max_chunk_payload", kMaxChunkPayload},
           {"record_bytes", kRecordSize},
           {"block_header_bytes", kBlockHeaderSize},
           {"signature_bytes", crypto::kSignatureSize},
           {"public_key_bytes", crypto::kPublicKeySize},
           {"certificate_bytes", kCertificateSize},
           {"chain_state_bytes", kChainStateSize},
           {"seal_header_bytes", kSealHeaderSize},
           {"seal_overhead_bytes", kSealOverhead},
           {"block_file_bytes", "seal_overhead + block_header + signature + 292*m"},
           {"protocol_version", kProtocolVersion},
           {"max_frame_bytes", kMaxFrameSize},
           {"range_open_end", kRangeOpenEnd},
           {"frame_types", frames}};
    *out = dup_string(j.dump(2));
  });
}

}  // extern "C"

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

// emlog command-line tool. Talks to the library only through emlog.h.

#include <emlog/emlog.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

namespace {

using json = nlohmann::json;

enum Exit : int { kOk = 0, kFindings = 1, kUsage = 2, kIo = 3 };

int exit_for(emlog_status s) {
  switch (s) {
    case EMLOG_OK:
      return kOk;
    case EMLOG_E_INVALID_PARAMETER:
    case EMLOG_E_PARSE:
      return kUsage;
    default:
      return kIo;
  }
}

int report_error(const char* what, emlog_status s) {
  std::fprintf(stderr, "emlog: %s: %s: %s\n", what, emlog_status_name(s), emlog_last_error());
  return exit_for(s);
}

// Owns a malloc'd string returned by the library.
struct LibString {
  char* p = nullptr;
  ~LibString() { emlog_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

struct DeviceHandle {
  emlog_device* d = nullptr;
  ~DeviceHandle() { emlog_device_close(d); }
};

struct IdentityHandle {
  emlog_identity* id = nullptr;
  ~IdentityHandle() { emlog_identity_close(id); }
};

const char* opt_cstr(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

// One line per finding, then the verdict.
void print_verdict(const std::string& report) {
  json j = json::parse(report, nullptr, false);
  if (j.is_discarded()) {
    std::cout << report << "\n";
    return;
  }
  for (const auto& e : j["entries"]) {
    if (e["status"] == "ok") continue;
    std::cout << "block " << e["block_id"].get<std::uint32_t>() << ": " << e["status"].get<std::string>();
    if (e.contains("msg_id")) std::cout << " (record " << e["msg_id"].get<std::uint32_t>() << ")";
    if (e.contains("detail")) std::cout << " - " << e["detail"].get<std::string>();
    std::cout << "\n";
  }
  for (const auto& n : j["notes"]) std::cout << "note: " << n.get<std::string>() << "\n";
  std::cout << "verdict: " << j["verdict"].get<std::string>() << " (" << j["blocks_checked"].get<std::uint64_t>()
            << " blocks, " << j["records_checked"].get<std::uint64_t>() << " records"
            << (j["hmac_verified"].get<bool>() ? ", full" : ", public") << ")\n";
}

struct Options {
  std::string store = "emlog-store";
  std::uint32_t c = 10;
  std::uint32_t m = 100;
  std::uint32_t epoch = 0;
  std::string issuer;
  std::string verifier_key;
  std::string rlk_out;

  std::string input = "-";
  std::string source = "generic";
  std::string on_full = "block";
  std::size_t queue = 4096;

  std::string mode = "public";
  bool full = false;
  std::string archive;
  std::string rlk;
  std::string provision_key;
  std::string anchors;

  std::string host = "127.0.0.1";
  std::uint16_t port = 7426;
  std::uint32_t sessions = 0;

  std::string identity;
  std::string role = "verifier";
  std::uint32_t first = 0;
  std::string last;
  std::string out;

  std::string bench_config;
  std::uint64_t count = 100000;
  double mean = 115.08;
  double sd = 5.73;
  std::uint64_t seed = 1;

  bool json_out = false;
};

int cmd_init(const Options& o) {
  DeviceHandle dev;
  emlog_status s = emlog_device_init(o.store.c_str(), o.c, o.m, opt_cstr(o.issuer), o.epoch, &dev.d);
  if (s != EMLOG_OK) return report_error("init", s);
  if (!o.verifier_key.empty()) {
    std::string out = o.rlk_out.empty() ? o.store + "/verifier.rlk" : o.rlk_out;
    s = emlog_device_export_rlk(dev.d, o.verifier_key.c_str(), out.c_str());
    if (s != EMLOG_OK) return report_error("export root logging key", s);
    std::fprintf(stderr, "sealed root logging key written to %s\n", out.c_str());
  }
  LibString pem;
  s = emlog_device_certificate_pem(dev.d, &pem.p);
  if (s != EMLOG_OK) return report_error("certificate", s);
  std::cout << pem.str();
  return kOk;
}

int cmd_ingest(const Options& o) {
  if (o.on_full != "block" && o.on_full != "drop") {
    std::fprintf(stderr, "emlog: --on-full must be block or drop\n");
    return kUsage;
  }
  DeviceHandle dev;
  emlog_status s = emlog_device_open(o.store.c_str(), o.epoch, &dev.d);
  if (s != EMLOG_OK) return report_error("open store", s);
  LibString rep;
  s = emlog_device_ingest(dev.d, o.input.c_str(), o.source.c_str(), o.on_full == "drop", o.queue, &rep.p);
  if (s != EMLOG_OK) return report_error("ingest", s);
  if (o.json_out) {
    std::cout << rep.str() << "\n";
  } else {
    json j = json::parse(rep.str(), nullptr, false);
    if (!j.is_discarded())
      std::cout << "ingested " << j.value("entries", 0ULL) << " entries into " << j.value("records", 0ULL) << " records, " << j.value("blocks", 0ULL) << " blocks (" << j.value("dropped", 0ULL) << " dropped, "
                << j.value("parse_warnings", 0ULL) << " parse warnings)\n";
  }
  return kOk;
}

int cmd_flush(const Options& o) {
  DeviceHandle dev;
  emlog_status s = emlog_device_open(o.store.c_str(), o.epoch, &dev.d);
  if (s != EMLOG_OK) return report_error("open store", s);
  if ((s = emlog_device_flush(dev.d)) != EMLOG_OK) return report_error("flush", s);
  LibString st;
  if ((s = emlog_device_stats_json(dev.d, &st.p)) != EMLOG_OK) return report_error("stats", s);
  std::cout << st.str() << "\n";
  return kOk;
}

int cmd_verify(const Options& o) {
  bool full = o.full || o.mode == "full";
  if (o.mode != "public" && o.mode != "full") {
    std::fprintf(stderr, "emlog: --mode must be public or full\n");
    return kUsage;
  }
  int ok = 0;
  LibString rep;
  emlog_status s;
  if (!o.archive.empty()) {
    s = emlog_verify_archive(o.archive.c_str(), opt_cstr(o.anchors), full, opt_cstr(o.rlk), opt_cstr(o.provision_key),
                             &ok, &rep.p);
    if (s == EMLOG_E_AUTH) {
      std::fprintf(stderr, "emlog: verify: %s\n", emlog_last_error());
      return kFindings;
    }
  } else {
    s = emlog_verify_store(o.store.c_str(), full, opt_cstr(o.rlk), opt_cstr(o.provision_key), &ok, &rep.p);
  }
  if (s != EMLOG_OK) return report_error("verify", s);
  if (o.json_out)
    std::cout << rep.str() << "\n";
  else
    print_verdict(rep.str());
  return ok ? kOk : kFindings;
}

void on_listening(uint16_t port, void*) {
  std::printf("listening on port %u\n", static_cast<unsigned>(port));
  std::fflush(stdout);
}

void on_session(const char* j, void*) {
  std::printf("%s\n", j);
  std::fflush(stdout);
}

int cmd_serve(const Options& o) {
  if (o.anchors.empty()) {
    std::fprintf(stderr, "emlog: serve needs --anchors\n");
    return kUsage;
  }
  DeviceHandle dev;
  emlog_status s = emlog_device_open(o.store.c_str(), o.epoch, &dev.d);
  if (s != EMLOG_OK) return report_error("open store", s);
  s = emlog_device_serve(dev.d, o.host.c_str(), o.port, o.anchors.c_str(), o.sessions, on_listening, on_session,
                         nullptr);
  if (s != EMLOG_OK) return report_error("serve", s);
  return kOk;
}

int cmd_fetch(const Options& o) {
  if (o.identity.empty() || o.anchors.empty() || o.out.empty()) {
    std::fprintf(stderr, "emlog: fetch needs --identity, --anchors and --out\n");
    return kUsage;
  }
  std::uint32_t last = EMLOG_RANGE_OPEN;
  if (!o.last.empty() && o.last != "open") {
    try {
      last = static_cast<std::uint32_t>(std::stoul(o.last));
    } catch (const std::exception&) {
      std::fprintf(stderr, "emlog: --last must be a block id or 'open'\n");
      return kUsage;
    }
  }
  IdentityHandle id;
  emlog_status s = emlog_identity_open(o.identity.c_str(), &id.id);
  if (s != EMLOG_OK) return report_error("open identity", s);
  LibString rep;
  s = emlog_fetch(id.id, o.anchors.c_str(), o.host.c_str(), o.port, o.first, last, o.out.c_str(), &rep.p);
  if (rep.p) std::cout << rep.str() << "\n";
  if (s != EMLOG_OK) return report_error("fetch", s);
  return kOk;
}

int cmd_identity(const Options& o) {
  emlog_role role;
  if (o.role == "verifier") role = EMLOG_ROLE_VERIFIER;
  else if (o.role == "authority") role = EMLOG_ROLE_AUTHORITY;
  else if (o.role == "device") role = EMLOG_ROLE_DEVICE;
  else {
    std::fprintf(stderr, "emlog: --role must be verifier, authority or device\n");
    return kUsage;
  }
  emlog_status s = emlog_identity_create(o.identity.c_str(), role, opt_cstr(o.issuer));
  if (s != EMLOG_OK) return report_error("identity", s);
  IdentityHandle id;
  if ((s = emlog_identity_open(o.identity.c_str(), &id.id)) != EMLOG_OK) return report_error("identity", s);
  LibString pem;
  if ((s = emlog_identity_certificate_pem(id.id, &pem.p)) != EMLOG_OK) return report_error("certificate", s);
  std::cout << pem.str();
  return kOk;
}

int cmd_export_rlk(const Options& o) {
  DeviceHandle dev;
  emlog_status s = emlog_device_open(o.store.c_str(), 0, &dev.d);
  if (s != EMLOG_OK) return report_error("open store", s);
  s = emlog_device_export_rlk(dev.d, o.provision_key.c_str(), o.out.c_str());
  if (s != EMLOG_OK) return report_error("export root logging key", s);
  return kOk;
}

int cmd_bench(const Options& o) {
  std::string cfg;
  if (!o.bench_config.empty()) {
    std::ifstream in(o.bench_config);
    if (!in) {
      std::fprintf(stderr, "emlog: cannot read %s\n", o.bench_config.c_str());
      return kUsage;
    }
    cfg.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  int passed = 0;
  LibString rep;
  emlog_status s = emlog_bench(cfg.empty() ? nullptr : cfg.c_str(), &passed, &rep.p);
  if (s != EMLOG_OK) return report_error("bench", s);
  if (!o.out.empty()) {
    std::ofstream out(o.out);
    out << rep.str() << "\n";
    if (!out) {
      std::fprintf(stderr, "emlog: cannot write %s\n", o.out.c_str());
      return kIo;
    }
  }
  if (o.json_out || o.out.empty()) {
    std::cout << rep.str() << "\n";
  }
  std::cerr << "bench checks: " << (passed ? "pass" : "FAIL") << "\n";
  return passed ? kOk : kFindings;
}

int cmd_gen(const Options& o) {
  emlog_status s = emlog_gen_synthetic(o.out.empty() ? "-" : o.out.c_str(), o.count, o.mean, o.sd, o.seed);
  return s == EMLOG_OK ? kOk : report_error("gen", s);
}

int cmd_formats() {
  LibString j;
  emlog_status s = emlog_formats_json(&j.p);
  if (s != EMLOG_OK) return report_error("export-formats", s);
  std::cout << j.str() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emlog: tamper-evident logging with forward-secure keys and sealed storage"};
  app.set_version_flag("--version", std::string(emlog_version()));
  app.set_config("--config", "", "TOML/INI file supplying defaults for any long option");
  app.require_subcommand(1);
  Options o;

  auto add_store = [&](CLI::App* sc) { sc->add_option("--store", o.store, "Store directory")->capture_default_str(); };
  auto add_epoch = [&](CLI::App* sc) {
    sc->add_option("--epoch", o.epoch, "Seconds before an open group is committed (0: never)");
  };

  auto* init = app.add_subcommand("init", "Create a store and device identity; prints the device certificate");
  add_store(init);
  init->add_option("-c,--group-size", o.c, "Blocks per group (c)")->capture_default_str()->check(CLI::PositiveNumber);
  init->add_option("-m,--block-size", o.m, "Records per block (m)")->capture_default_str()->check(CLI::PositiveNumber);
  init->add_option("--issuer", o.issuer, "Identity directory that signs the device certificate");
  init->add_option("--verifier-key", o.verifier_key, "Provisioning key; also writes a sealed root logging key");
  init->add_option("--rlk-out", o.rlk_out, "Where to write the sealed root logging key");
  add_epoch(init);

  auto* ingest = app.add_subcommand("ingest", "Append newline-delimited log entries");
  add_store(ingest);
  ingest->add_option("-i,--input", o.input, "Input file, - for standard input")->capture_default_str();
  ingest->add_option("-s,--source", o.source, "apache, snort, dmesg or generic")->capture_default_str();
  ingest->add_option("--on-full", o.on_full, "Queue policy: block or drop")->capture_default_str();
  ingest->add_option("--queue", o.queue, "Handoff queue capacity")->capture_default_str();
  ingest->add_flag("--json", o.json_out, "Print the ingest report as JSON");
  add_epoch(ingest);

  auto* flush = app.add_subcommand("flush", "Recover the store and commit any open block; prints stats");
  add_store(flush);

  auto* verify = app.add_subcommand("verify", "Verify a local store or a fetched archive");
  add_store(verify);
  verify->add_option("--archive", o.archive, "Archive written by fetch");
  verify->add_option("--mode", o.mode, "public or full")->capture_default_str();
  verify->add_flag("--full", o.full, "Same as --mode full");
  verify->add_option("--rlk", o.rlk, "Sealed root logging key for full mode");
  verify->add_option("--provision-key", o.provision_key, "Key that opens --rlk");
  verify->add_option("--anchors", o.anchors, "Trust anchors for the archive's device certificate");
  verify->add_flag("--json", o.json_out, "Print the verification report as JSON");

  auto* serve = app.add_subcommand("serve", "Serve committed blocks to authenticated verifiers");
  add_store(serve);
  serve->add_option("--anchors", o.anchors, "Directory of trusted verifier certificates (PEM)");
  serve->add_option("--host", o.host, "Listen address")->capture_default_str();
  serve->add_option("--port", o.port, "Listen port, 0 for any")->capture_default_str();
  serve->add_option("--sessions", o.sessions, "Stop after this many sessions (0: run forever)");

  auto* fetch = app.add_subcommand("fetch", "Retrieve a block range into an archive");
  fetch->add_option("--identity", o.identity, "Verifier identity directory");
  fetch->add_option("--anchors", o.anchors, "Directory of trusted device certificates (PEM)");
  fetch->add_option("--host", o.host, "Device address")->capture_default_str();
  fetch->add_option("--port", o.port, "Device port")->capture_default_str();
  fetch->add_option("--first", o.first, "First block id")->capture_default_str();
  fetch->add_option("--last", o.last, "Last block id, or open for everything committed");
  fetch->add_option("-o,--out", o.out, "Archive path");

  auto* identity = app.add_subcommand("identity", "Create a verifier or authority identity; prints its certificate");
  identity->add_option("--dir", o.identity, "Identity directory")->required();
  identity->add_option("--role", o.role, "verifier, authority or device")->capture_default_str();
  identity->add_option("--issuer", o.issuer, "Identity directory that signs the certificate");

  auto* keygen = app.add_subcommand("provision-key", "Create a 32-byte provisioning key for full-mode verifiers");
  keygen->add_option("-o,--out", o.out, "Key path")->required();

  auto* export_rlk = app.add_subcommand("export-rlk", "Seal the root logging key for a provisioned verifier");
  add_store(export_rlk);
  export_rlk->add_option("--provision-key", o.provision_key, "Provisioning key")->required();
  export_rlk->add_option("-o,--out", o.out, "Output path")->required();

  auto* bench = app.add_subcommand("bench", "Run the benchmark grid and its trend checks");
  bench->add_option("--bench-config", o.bench_config, "JSON benchmark configuration");
  bench->add_option("-o,--out", o.out, "Write the JSON report here");
  bench->add_flag("--json", o.json_out, "Also print the report when --out is given");

  auto* gen = app.add_subcommand("gen", "Generate synthetic log lines");
  gen->add_option("-o,--out", o.out, "Output file (default standard output)");
  gen->add_option("-n,--count", o.count, "Number of lines")->capture_default_str();
  gen->add_option("--mean", o.mean, "Mean line length")->capture_default_str()->check(CLI::Range(1.0, 65536.0));
  gen->add_option("--sd", o.sd, "Standard deviation of line length")->capture_default_str()->check(
      CLI::NonNegativeNumber);
  gen->add_option("--seed", o.seed, "PRNG seed")->capture_default_str();

  auto* formats = app.add_subcommand("export-formats", "Print format and protocol constants as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  if (*init) return cmd_init(o);
  if (*ingest) return cmd_ingest(o);
  if (*flush) return cmd_flush(o);
  if (*verify) return cmd_verify(o);
  if (*serve) return cmd_serve(o);
  if (*fetch) return cmd_fetch(o);
  if (*identity) return cmd_identity(o);
  if (*keygen) {
    emlog_status s = emlog_provision_key_create(o.out.c_str());
    return s == EMLOG_OK ? kOk : report_error("provision-key", s);
  }
  if (*export_rlk) return cmd_export_rlk(o);
  if (*bench) return cmd_bench(o);
  if (*gen) return cmd_gen(o);
  if (*formats) return cmd_formats();
  return kUsage;
}

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

// Log ingestion: source parsers, chunking into 254-byte record payloads, and
// LogDevice, the protected logger that turns entries into signed blocks and
// commits them group by group to the sealed store.

#ifndef EMLOG_COLLECTOR_HPP
#define EMLOG_COLLECTOR_HPP

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sealstore.hpp"

namespace emlog {

enum class LogSource { apache_access, snort_fast, dmesg, generic };

const char* source_name(LogSource s) noexcept;
std::optional<LogSource> source_from_name(std::string_view name);

inline constexpr std::size_t kMaxLineSize = 64 * 1024;

struct RawEntry {
  LogSource source = LogSource::generic;
  std::optional<std::string> timestamp_text;  // as it appears in the line
  std::optional<double> timestamp;            // unix seconds (apache), seconds since boot (dmesg)
  Bytes body;                                 // the line, verbatim, minus the trailing newline
};

// Parses one line for the given source. A line that does not have the
// source's shape comes back as a generic entry and sets *warning.
// invalid_parameter for an empty line or one over kMaxLineSize.
RawEntry parse_line(LogSource source, std::string_view line, bool* warning = nullptr);

struct Chunk {
  Bytes payload;  // at most kMaxChunkPayload bytes
  bool continuation = false;
};

// An empty body yields one empty chunk.
std::vector<Chunk> chunk_entry(ByteView body);
inline std::size_t chunk_count(std::size_t body_size) {
  return body_size == 0 ? 1 : (body_size + kMaxChunkPayload - 1) / kMaxChunkPayload;
}

enum class QueueFull { block, drop };

struct IngestPolicy {
  ChainParams params;
  std::optional<std::uint32_t> epoch_seconds;  // flush interval, >= 1
  QueueFull on_full_queue = QueueFull::block;
  std::size_t queue_capacity = 4096;

  void validate() const;  // invalid_parameter
};

// Seconds on a monotonic clock; tests inject their own.
using Clock = std::function<double()>;
Clock steady_clock_seconds();

struct DeviceStats {
  std::uint64_t records = 0;
  std::uint64_t blocks_signed = 0;
  std::uint64_t blocks_committed = 0;
  std::uint64_t commits = 0;   // sealed group writes
  std::uint64_t epoch_flushes = 0;
  std::uint64_t unsealed_records = 0;
  std::uint64_t unsealed_bytes = 0;
  std::uint64_t max_unsealed_records = 0;
  std::uint64_t max_unsealed_bytes = 0;
};

struct DeviceOptions {
  std::optional<std::uint32_t> epoch_seconds;
  Clock clock;  // defaults to steady_clock_seconds()
  std::string app_id = "emlog.ta";
};

/// The protected logger. Holds the root logging key, the signing identity and
/// the unsealed tail of the chain; everything else lives sealed in the store.
///
/// Records are tagged as they arrive. A block is signed when it reaches m
/// records. Signed blocks stay in memory until their group completes, an
/// epoch expires or flush() is called, and are then committed together.
/// Destroying a device without flush() drops the unsealed tail, which is
/// exactly what a power loss does.
class LogDevice {
 public:
  // Creates the store: root storage key, manifest, root logging key, signing
  // identity (issued by issuer, or self-signed), device.pem and genesis state.
  static LogDevice init(const std::filesystem::path& dir, const ChainParams& params, DeviceOptions opts = {},
                        const DeviceIdentity* issuer = nullptr);
  // Reopens, recovers after a crash and resumes at the block after the
  // committed state. integrity_alarm when the state is missing.
  static LogDevice open(const std::filesystem::path& dir, DeviceOptions opts = {});

  LogDevice(LogDevice&&) noexcept;
  LogDevice& operator=(LogDevice&&) noexcept;
  ~LogDevice();

  // Appends one entry, split into as many records as it needs. Chunks of one
  // entry may span blocks.
  void append(ByteView body);
  void append(const RawEntry& entry) { append(entry.body); }

  // Signs the partial block, if any, and commits everything pending.
  void flush();
  // Flushes when the epoch has expired. Called from append() as well.
  bool tick();

  const DeviceStats& stats() const { return stats_; }
  const DeviceIdentity& identity() const;
  const Certificate& certificate() const { return identity().certificate(); }
  const ChainParams& params() const { return store_->manifest().params; }
  SealedStore& store() { return *store_; }
  const SealedStore& store() const { return *store_; }
  const RecoveryReport& recovery() const { return recovery_; }
  std::uint32_t next_block_id() const { return next_block_; }

  // Root logging key sealed for a verifier: the verifier key is a 32-byte
  // provisioning secret shared out of band; see open_verifier_rlk().
  Bytes export_rlk(ByteView verifier_key) const;

  void set_fault_hook(FaultHook hook) { store_->set_fault_hook(std::move(hook)); }

 private:
  struct Impl;
  LogDevice();

  void start_block();
  void finish_block();
  void commit_pending();
  void account();

  std::unique_ptr<SealedStore> store_;
  std::unique_ptr<Impl> impl_;
  DeviceOptions opts_;
  DeviceStats stats_;
  RecoveryReport recovery_;
  std::uint32_t next_block_ = 0;
  double last_commit_ = 0;
};

// Unseals a root logging key produced by LogDevice::export_rlk().
RootLoggingKey open_verifier_rlk(ByteView sealed, ByteView verifier_key);

/// Bounded, ordered hand-over between an entry producer and the logger.
class EntryQueue {
 public:
  EntryQueue(std::size_t capacity, QueueFull mode) : capacity_(capacity ? capacity : 1), mode_(mode) {}

  // false when the entry was dropped (drop mode, queue full) or the queue is closed.
  bool push(RawEntry e);
  std::optional<RawEntry> pop();  // nullopt once closed and drained
  void close();
  std::uint64_t dropped() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable not_empty_, not_full_;
  std::deque<RawEntry> q_;
  std::size_t capacity_;
  QueueFull mode_;
  bool closed_ = false;
  std::uint64_t dropped_ = 0;
};

struct IngestStats {
  std::uint64_t lines = 0;
  std::uint64_t entries = 0;
  std::uint64_t records = 0;
  std::uint64_t blocks = 0;
  std::uint64_t groups = 0;
  std::uint64_t parse_warnings = 0;
  std::uint64_t dropped = 0;
  std::uint64_t empty_lines = 0;
  std::uint64_t oversize_splits = 0;
  std::uint64_t bytes = 0;
  std::optional<std::string> first_timestamp, last_timestamp;
  double seconds = 0;
  double logs_per_second = 0;

  std::string to_json() const;
};

/// Reads newline-delimited lines from in on a producer thread, parses them for
/// source and appends them in arrival order. Lines over kMaxLineSize are cut
/// into several entries. flush() is called at end of input when flush_at_end.
/// A store failure stops ingestion; the error names the entry it failed on.
IngestStats ingest(LogDevice& device, std::istream& in, LogSource source, QueueFull on_full = QueueFull::block,
                   std::size_t queue_capacity = 4096, bool flush_at_end = true);

}  // namespace emlog

#endif  // EMLOG_COLLECTOR_HPP

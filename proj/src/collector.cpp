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

#include "collector.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <thread>

#include "json.hpp"

namespace emlog {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVerifierLabel = "emlog-verifier";
constexpr const char* kRootKeyFile = "hw_root.key";
constexpr const char* kCertFile = "device.pem";

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Parses exactly n digits at s[pos].
std::optional<int> digits(std::string_view s, std::size_t pos, std::size_t n) {
  if (pos + n > s.size()) return std::nullopt;
  int v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_digit(s[pos + i])) return std::nullopt;
    v = v * 10 + (s[pos + i] - '0');
  }
  return v;
}

std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// "30/Jun/2016:00:00:00 -0400" -> unix seconds.
std::optional<double> parse_clf_time(std::string_view t) {
  static constexpr std::string_view months[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  if (t.size() != 26 || t[2] != '/' || t[6] != '/' || t[11] != ':' || t[14] != ':' || t[17] != ':' ||
      t[20] != ' ' || (t[21] != '+' && t[21] != '-'))
    return std::nullopt;
  auto day = digits(t, 0, 2), year = digits(t, 7, 4), hh = digits(t, 12, 2), mm = digits(t, 15, 2),
       ss = digits(t, 18, 2), tzh = digits(t, 22, 2), tzm = digits(t, 24, 2);
  if (!day || !year || !hh || !mm || !ss || !tzh || !tzm) return std::nullopt;
  unsigned month = 0;
  for (unsigned i = 0; i < 12; ++i)
    if (t.substr(3, 3) == months[i]) month = i + 1;
  if (month == 0 || *day < 1 || *day > 31 || *hh > 23 || *mm > 59 || *ss > 60) return std::nullopt;
  std::int64_t secs = days_from_civil(*year, month, static_cast<unsigned>(*day)) * 86400 + *hh * 3600 + *mm * 60 + *ss;
  std::int64_t off = (*tzh * 3600 + *tzm * 60) * (t[21] == '-' ? -1 : 1);
  return static_cast<double>(secs - off);
}

std::size_t skip_token(std::string_view s, std::size_t pos) {
  while (pos < s.size() && s[pos] != ' ') ++pos;
  return pos;
}

// host ident user [time] "request" status size [...]
bool parse_apache(std::string_view s, RawEntry& e) {
  std::size_t p = 0;
  for (int field = 0; field < 3; ++field) {
    std::size_t end = skip_token(s, p);
    if (end == p || end >= s.size()) return false;
    p = end + 1;
  }
  if (p >= s.size() || s[p] != '[') return false;
  std::size_t close = s.find(']', p);
  if (close == std::string_view::npos) return false;
  std::string_view ts = s.substr(p + 1, close - p - 1);
  auto when = parse_clf_time(ts);
  if (!when) return false;
  p = close + 1;
  if (p + 1 >= s.size() || s[p] != ' ' || s[p + 1] != '"') return false;
  p += 2;
  while (p < s.size() && s[p] != '"') p += (s[p] == '\\') ? 2 : 1;
  if (p >= s.size()) return false;
  p += 1;
  if (p >= s.size() || s[p] != ' ') return false;
  ++p;
  if (s.compare(p, 1, "-") == 0) {
    ++p;
  } else {
    if (!digits(s, p, 3)) return false;
    p += 3;
  }
  if (p >= s.size() || s[p] != ' ') return false;
  ++p;
  std::size_t end = skip_token(s, p);
  if (end == p) return false;
  std::string_view size = s.substr(p, end - p);
  if (size != "-")
    for (char c : size)
      if (!is_digit(c)) return false;
  e.timestamp_text = std::string(ts);
  e.timestamp = when;
  return true;
}

// MM/DD[/YY]-HH:MM:SS[.frac]  [**] ... [**] ...
bool parse_snort(std::string_view s, RawEntry& e) {
  std::size_t p = 0;
  if (!digits(s, 0, 2) || s.size() < 6 || s[2] != '/' || !digits(s, 3, 2)) return false;
  p = 5;
  if (p < s.size() && s[p] == '/') {
    if (!digits(s, p + 1, 2)) return false;
    p += 3;
  }
  if (p >= s.size() || s[p] != '-') return false;
  ++p;
  if (!digits(s, p, 2) || s.size() < p + 8 || s[p + 2] != ':' || !digits(s, p + 3, 2) || s[p + 5] != ':' ||
      !digits(s, p + 6, 2))
    return false;
  p += 8;
  if (p < s.size() && s[p] == '.') {
    ++p;
    std::size_t start = p;
    while (p < s.size() && is_digit(s[p])) ++p;
    if (p == start) return false;
  }
  std::string_view ts = s.substr(0, p);
  while (p < s.size() && s[p] == ' ') ++p;
  if (s.compare(p, 4, "[**]") != 0) return false;
  if (s.find("[**]", p + 4) == std::string_view::npos) return false;
  e.timestamp_text = std::string(ts);
  return true;
}

// [ seconds.micros] text
bool parse_dmesg(std::string_view s, RawEntry& e) {
  if (s.empty() || s[0] != '[') return false;
  std::size_t p = 1;
  while (p < s.size() && s[p] == ' ') ++p;
  std::size_t start = p;
  while (p < s.size() && is_digit(s[p])) ++p;
  if (p == start || p >= s.size() || s[p] != '.') return false;
  ++p;
  std::size_t frac = p;
  while (p < s.size() && is_digit(s[p])) ++p;
  if (p == frac || p >= s.size() || s[p] != ']') return false;
  std::string_view num = s.substr(start, p - start);
  e.timestamp_text = std::string(num);
  e.timestamp = std::stod(std::string(num));
  return true;
}

}  // namespace

const char* source_name(LogSource s) noexcept {
  switch (s) {
    case LogSource::apache_access: return "apache";
    case LogSource::snort_fast: return "snort";
    case LogSource::dmesg: return "dmesg";
    case LogSource::generic: return "generic";
  }
  return "generic";
}

std::optional<LogSource> source_from_name(std::string_view name) {
  if (name == "apache" || name == "apache_access") return LogSource::apache_access;
  if (name == "snort" || name == "snort_fast") return LogSource::snort_fast;
  if (name == "dmesg") return LogSource::dmesg;
  if (name == "generic") return LogSource::generic;
  return std::nullopt;
}

RawEntry parse_line(LogSource source, std::string_view line, bool* warning) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (line.empty()) fail(Errc::invalid_parameter, "empty log line");
  if (line.size() > kMaxLineSize) fail(Errc::invalid_parameter, "log line exceeds 64 KiB");
  RawEntry e;
  e.body.assign(line.begin(), line.end());
  bool ok = true;
  switch (source) {
    case LogSource::apache_access: ok = parse_apache(line, e); break;
    case LogSource::snort_fast: ok = parse_snort(line, e); break;
    case LogSource::dmesg: ok = parse_dmesg(line, e); break;
    case LogSource::generic: break;
  }
  e.source = ok ? source : LogSource::generic;
  if (!ok) {
    e.timestamp_text.reset();
    e.timestamp.reset();
  }
  if (warning) *warning = !ok;
  return e;
}

std::vector<Chunk> chunk_entry(ByteView body) {
  std::vector<Chunk> out;
  out.reserve(chunk_count(body.size()));
  std::size_t off = 0;
  do {
    std::size_t n = std::min(kMaxChunkPayload, body.size() - off);
    Chunk c;
    c.payload.assign(body.begin() + off, body.begin() + off + n);
    off += n;
    c.continuation = off < body.size();
    out.push_back(std::move(c));
  } while (off < body.size());
  return out;
}

void IngestPolicy::validate() const {
  if (params.c < 1 || params.m < 1) fail(Errc::invalid_parameter, "c and m must be at least 1");
  if (epoch_seconds && *epoch_seconds < 1) fail(Errc::invalid_parameter, "epoch must be at least one second");
}

Clock steady_clock_seconds() {
  return [] {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
  };
}

// ---- LogDevice -------------------------------------------------------------

struct LogDevice::Impl {
  std::optional<RootLoggingKey> rlk;
  std::optional<DeviceIdentity> id;
  std::optional<BlockKey> bk;       // key of block next_block_, once started
  std::optional<MessageKey> mk;     // key of the next record
  std::optional<BlockBuilder> builder;
  std::vector<Block> pending;       // signed, not yet committed
};

LogDevice::LogDevice() : impl_(std::make_unique<Impl>()) {}
LogDevice::LogDevice(LogDevice&&) noexcept = default;
LogDevice& LogDevice::operator=(LogDevice&&) noexcept = default;
LogDevice::~LogDevice() = default;

const DeviceIdentity& LogDevice::identity() const { return *impl_->id; }

LogDevice LogDevice::init(const fs::path& dir, const ChainParams& params, DeviceOptions opts,
                          const DeviceIdentity* issuer) {
  if (opts.epoch_seconds && *opts.epoch_seconds < 1) fail(Errc::invalid_parameter, "epoch must be at least one second");
  fs::create_directories(dir);
  if (fs::exists(dir / "manifest.seal")) fail(Errc::already_exists, "store already initialised: " + dir.string());
  Key32 root = load_or_create_root_key(dir / kRootKeyFile);

  Manifest man;
  man.params = ChainParams::make(params.c, params.m);
  man.device_id = random_device_id();
  man.app_id = opts.app_id;

  LogDevice d;
  d.opts_ = std::move(opts);
  if (!d.opts_.clock) d.opts_.clock = steady_clock_seconds();
  d.store_ = std::make_unique<SealedStore>(
      SealedStore::create(dir, StorageKey::derive(root.view(), as_bytes(man.app_id)), man));
  d.impl_->rlk = RootLoggingKey::generate();
  d.impl_->id = DeviceIdentity::create(Role::device, man.device_id, issuer);

  SecretBuffer id_secret = d.impl_->id->secret_encode();
  SecretBuffer secret;
  secret.append(d.impl_->rlk->key().view());
  secret.append(id_secret.view());
  d.store_->write_secret(secret.view());
  {
    std::ofstream pem(dir / kCertFile, std::ios::trunc);
    pem << d.impl_->id->certificate().to_pem();
    if (!pem) fail(Errc::io_error, "cannot write device certificate");
  }
  d.last_commit_ = d.opts_.clock();
  return d;
}

LogDevice LogDevice::open(const fs::path& dir, DeviceOptions opts) {
  if (!fs::exists(dir / kRootKeyFile)) fail(Errc::io_error, "no root storage key in " + dir.string());
  Key32 root = load_root_key(dir / kRootKeyFile);
  LogDevice d;
  d.opts_ = std::move(opts);
  if (!d.opts_.clock) d.opts_.clock = steady_clock_seconds();
  d.store_ = std::make_unique<SealedStore>(
      SealedStore::open(dir, StorageKey::derive(root.view(), as_bytes(d.opts_.app_id))));

  SecretBuffer secret = d.store_->read_secret();
  if (secret.size() < 32) fail(Errc::parse_error, "sealed secret too short");
  d.impl_->rlk.emplace(secret.view().first(32));
  d.impl_->id = DeviceIdentity::secret_decode(secret.view().subspan(32));

  d.recovery_ = d.store_->recover(d.impl_->id->public_key());
  const auto& st = d.store_->state();
  if (!st) fail(Errc::integrity_alarm, "chain state missing; refusing to resume");
  d.next_block_ = st->has_blocks ? st->latest_block + 1 : 0;
  if (st->has_blocks && st->latest_block == UINT32_MAX) fail(Errc::block_full, "block id space exhausted");
  d.last_commit_ = d.opts_.clock();
  return d;
}

void LogDevice::start_block() {
  Impl& s = *impl_;
  const ChainParams& p = params();
  if (!s.bk) {
    std::uint32_t g = p.group_of(next_block_);
    if (store_->has_ik(g)) {
      // Resuming inside a group: the sealed IK is the only way back in.
      IntermediateKey ik = store_->load_ik(g);
      s.bk = derive_block_key(ik, p, next_block_);
    } else {
      IntermediateKey ik = derive_ik(*s.rlk, g);
      s.bk = derive_block_key(ik, p, next_block_);
      store_->seal_ik(ik);
    }
  }
  s.mk = first_message_key(*s.bk);
  s.builder.emplace(next_block_);
}

void LogDevice::account() {
  std::uint64_t recs = 0, bytes = 0;
  for (const auto& b : impl_->pending) {
    recs += b.records.size();
    bytes += b.serialized_size();
  }
  if (impl_->builder) {
    recs += impl_->builder->size();
    bytes += impl_->builder->size() * kRecordSize;
  }
  stats_.unsealed_records = recs;
  stats_.unsealed_bytes = bytes;
  stats_.max_unsealed_records = std::max(stats_.max_unsealed_records, recs);
  stats_.max_unsealed_bytes = std::max(stats_.max_unsealed_bytes, bytes);
}

void LogDevice::finish_block() {
  Impl& s = *impl_;
  if (!s.builder || s.builder->empty()) return;
  const ChainParams& p = params();
  std::uint32_t done = next_block_;
  s.pending.push_back(sign_block(std::move(*s.builder), *s.id));
  s.builder.reset();
  s.mk.reset();
  ++stats_.blocks_signed;
  if (done == UINT32_MAX) {
    s.bk.reset();
  } else {
    next_block_ = done + 1;
    if (p.starts_group(next_block_))
      s.bk.reset();
    else
      s.bk = next_block_key(*s.bk, next_block_, p);
  }
  account();
  if (p.starts_group(next_block_) || done == UINT32_MAX) commit_pending();
}

void LogDevice::commit_pending() {
  Impl& s = *impl_;
  if (s.pending.empty()) return;
  store_->commit_blocks(s.pending);
  stats_.blocks_committed += s.pending.size();
  ++stats_.commits;
  s.pending.clear();
  last_commit_ = opts_.clock();
  account();
}

void LogDevice::append(ByteView body) {
  const ChainParams& p = params();
  for (Chunk& c : chunk_entry(body)) {
    if (!impl_->builder) start_block();
    Impl& s = *impl_;
    bool last_in_block = s.builder->size() + 1 == p.m;
    if (last_in_block) {
      s.builder->append(c.payload, *s.mk, c.continuation);
      s.mk.reset();
    } else {
      MessageKey succ_src = s.mk->clone();
      MessageKey succ = next_message_key(succ_src, p);
      s.builder->append(c.payload, *s.mk, c.continuation);
      s.mk = std::move(succ);
    }
    ++stats_.records;
    account();
    if (last_in_block) finish_block();
  }
  tick();
}

bool LogDevice::tick() {
  if (!opts_.epoch_seconds) return false;
  if (opts_.clock() - last_commit_ < *opts_.epoch_seconds) return false;
  bool had_data = !impl_->pending.empty() || (impl_->builder && !impl_->builder->empty());
  flush();
  last_commit_ = opts_.clock();
  if (had_data) ++stats_.epoch_flushes;
  return had_data;
}

void LogDevice::flush() {
  finish_block();
  commit_pending();
}

Bytes LogDevice::export_rlk(ByteView verifier_key) const {
  StorageKey k = StorageKey::derive(verifier_key, as_bytes(kVerifierLabel));
  return seal(ObjectType::secret, 1, impl_->rlk->key().view(), k).encode();
}

RootLoggingKey open_verifier_rlk(ByteView sealed, ByteView verifier_key) {
  StorageKey k = StorageKey::derive(verifier_key, as_bytes(kVerifierLabel));
  SecretBuffer plain = unseal_expected(sealed, k, ObjectType::secret, 1);
  return RootLoggingKey(plain.view());
}

// ---- queue and ingest ------------------------------------------------------

bool EntryQueue::push(RawEntry e) {
  std::unique_lock lock(mu_);
  if (mode_ == QueueFull::block) {
    not_full_.wait(lock, [&] { return closed_ || q_.size() < capacity_; });
  } else if (q_.size() >= capacity_) {
    ++dropped_;
    return false;
  }
  if (closed_) return false;
  q_.push_back(std::move(e));
  not_empty_.notify_one();
  return true;
}

std::optional<RawEntry> EntryQueue::pop() {
  std::unique_lock lock(mu_);
  not_empty_.wait(lock, [&] { return closed_ || !q_.empty(); });
  if (q_.empty()) return std::nullopt;
  RawEntry e = std::move(q_.front());
  q_.pop_front();
  not_full_.notify_one();
  return e;
}

void EntryQueue::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  not_empty_.notify_all();
  not_full_.notify_all();
}

std::uint64_t EntryQueue::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

std::string IngestStats::to_json() const {
  nlohmann::json j{{"lines", lines},
                   {"entries", entries},
                   {"records", records},
                   {"blocks", blocks},
                   {"groups", groups},
                   {"parse_warnings", parse_warnings},
                   {"dropped", dropped},
                   {"empty_lines", empty_lines},
                   {"oversize_splits", oversize_splits},
                   {"bytes", bytes},
                   {"seconds", seconds},
                   {"logs_per_second", logs_per_second}};
  j["first_timestamp"] = first_timestamp ? nlohmann::json(*first_timestamp) : nlohmann::json(nullptr);
  j["last_timestamp"] = last_timestamp ? nlohmann::json(*last_timestamp) : nlohmann::json(nullptr);
  return j.dump(2);
}

IngestStats ingest(LogDevice& device, std::istream& in, LogSource source, QueueFull on_full,
                   std::size_t queue_capacity, bool flush_at_end) {
  IngestStats st;
  EntryQueue queue(queue_capacity, on_full);
  std::uint64_t warnings = 0, lines = 0, empty = 0, splits = 0;

  std::thread producer([&] {
    std::string line;
    while (std::getline(in, line)) {
      ++lines;
      if (line.empty()) {
        ++empty;
        continue;
      }
      std::string_view rest = line;
      if (rest.size() > kMaxLineSize) ++splits;
      while (!rest.empty()) {
        std::string_view piece = rest.substr(0, kMaxLineSize);
        rest.remove_prefix(piece.size());
        bool warn = false;
        RawEntry e = parse_line(splits && piece.size() == kMaxLineSize ? LogSource::generic : source, piece, &warn);
        if (warn) ++warnings;
        if (!queue.push(std::move(e)) && on_full == QueueFull::block) return;
      }
    }
    queue.close();
  });

  const DeviceStats before = device.stats();
  const double t0 = steady_clock_seconds()();
  std::uint64_t index = 0;
  try {
    while (auto e = queue.pop()) {
      try {
        device.append(*e);
      } catch (const Error& err) {
        fail(err.code(), "ingest halted at entry " + std::to_string(index) + ": " + err.what());
      }
      if (e->timestamp_text) {
        if (!st.first_timestamp) st.first_timestamp = e->timestamp_text;
        st.last_timestamp = e->timestamp_text;
      }
      st.bytes += e->body.size();
      ++index;
    }
    if (flush_at_end) {
      try {
        device.flush();
      } catch (const Error& err) {
        fail(err.code(), "ingest halted at final flush after entry " + std::to_string(index) + ": " + err.what());
      }
    }
  } catch (...) {
    queue.close();
    producer.join();
    throw;
  }
  producer.join();

  st.seconds = steady_clock_seconds()() - t0;
  st.lines = lines;
  st.entries = index;
  st.parse_warnings = warnings;
  st.empty_lines = empty;
  st.oversize_splits = splits;
  st.dropped = queue.dropped();
  st.records = device.stats().records - before.records;
  st.blocks = device.stats().blocks_signed - before.blocks_signed;
  st.groups = device.stats().commits - before.commits;
  st.logs_per_second = st.seconds > 0 ? static_cast<double>(st.entries) / st.seconds : 0;
  return st;
}

}  // namespace emlog

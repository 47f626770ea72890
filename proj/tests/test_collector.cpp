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

#include <doctest.h>

#include <ctime>
#include <sstream>

#include "collector.hpp"
#include "test_util.hpp"

using namespace emlog;
namespace fs = std::filesystem;
using testutil::TempDir;

namespace {

struct ManualClock {
  double now = 1000;
  Clock fn() {
    return [this] { return now; };
  }
};

std::vector<Block> load_all(const SealedStore& s) {
  std::vector<Block> out;
  for (auto id : s.block_ids()) out.push_back(s.load_block(id));
  return out;
}

VerificationReport full_verify(LogDevice& d, const Bytes& vkey) {
  RootLoggingKey rlk = open_verifier_rlk(d.export_rlk(vkey), vkey);
  SequenceCheck chk{0, d.store().state(), std::nullopt, &rlk, d.params(), d.identity().public_key()};
  auto blocks = load_all(d.store());
  return verify_sequence(blocks, chk);
}

// Concatenates chunk payloads back into entries.
std::vector<std::string> reassemble(const std::vector<Block>& blocks) {
  std::vector<std::string> out;
  std::string cur;
  for (const auto& b : blocks)
    for (const auto& r : b.records) {
      auto p = r.payload();
      cur.append(p.begin(), p.end());
      if (!r.continuation()) {
        out.push_back(cur);
        cur.clear();
      }
    }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string lines_of(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& l : v) s += l + "\n";
  return s;
}

}  // namespace

TEST_CASE("apache access lines parse with a timestamp") {
  bool warn = true;
  RawEntry e = parse_line(LogSource::apache_access,
                          R"(127.0.0.1 - - [30/Jun/2016:00:00:00 -0400] "GET /index HTTP/1.1" 200 512)", &warn);
  CHECK_FALSE(warn);
  CHECK(e.source == LogSource::apache_access);
  REQUIRE(e.timestamp);
  std::tm tm{};
  tm.tm_year = 2016 - 1900;
  tm.tm_mon = 5;
  tm.tm_mday = 30;
  tm.tm_hour = 4;
  CHECK(*e.timestamp == static_cast<double>(timegm(&tm)));
  CHECK(e.timestamp_text == "30/Jun/2016:00:00:00 -0400");
  std::string combined =
      R"(10.1.2.3 - frank [01/Jan/2020:12:30:45 +0100] "POST /a?b=\"c\" HTTP/1.0" 404 - "http://r/" "UA/1.0")";
  e = parse_line(LogSource::apache_access, combined, &warn);
  CHECK_FALSE(warn);
  CHECK(as_chars(e.body) == combined);
}

TEST_CASE("malformed lines downgrade to generic and keep their bytes") {
  bool warn = false;
  const char* bad_apache[] = {
      "127.0.0.1 - - 30/Jun/2016:00:00:00 -0400 \"GET /\" 200 1",
      "127.0.0.1 - - [30/Foo/2016:00:00:00 -0400] \"GET /\" 200 1",
      "127.0.0.1 - - [30/Jun/2016:00:00:00 -0400] \"GET / 200 1",
      "127.0.0.1 - - [30/Jun/2016:00:00:00 -0400] \"GET /\" 2x0 1",
  };
  for (const char* l : bad_apache) {
    RawEntry e = parse_line(LogSource::apache_access, l, &warn);
    CHECK(warn);
    CHECK(e.source == LogSource::generic);
    CHECK_FALSE(e.timestamp);
    CHECK(as_chars(e.body) == l);
  }
  RawEntry e = parse_line(LogSource::snort_fast, "06/30-00:00:01.123456  [**] [1:2000:1] truncated alert", &warn);
  CHECK(warn);
  CHECK(e.source == LogSource::generic);
  e = parse_line(LogSource::dmesg, "[ 12.5 Booting", &warn);
  CHECK(warn);
}

TEST_CASE("snort fast alerts and dmesg lines parse") {
  bool warn = true;
  RawEntry e = parse_line(LogSource::snort_fast,
                          "06/30-00:00:01.123456  [**] [1:2000:1] ET SCAN probe [**] [Classification: x] "
                          "[Priority: 2] {TCP} 1.2.3.4:80 -> 5.6.7.8:1234",
                          &warn);
  CHECK_FALSE(warn);
  CHECK(e.source == LogSource::snort_fast);
  CHECK(e.timestamp_text == "06/30-00:00:01.123456");
  e = parse_line(LogSource::snort_fast, "06/30/16-00:00:01.1 [**] [1:1:1] x [**]", &warn);
  CHECK_FALSE(warn);

  e = parse_line(LogSource::dmesg, "[    0.000000] Booting Linux", &warn);
  CHECK_FALSE(warn);
  CHECK(e.source == LogSource::dmesg);
  REQUIRE(e.timestamp);
  CHECK(*e.timestamp == 0.0);
  e = parse_line(LogSource::dmesg, "[12345.678901] usb 1-1: new device\n", &warn);
  CHECK(*e.timestamp == doctest::Approx(12345.678901));
  CHECK(as_chars(e.body) == "[12345.678901] usb 1-1: new device");
}

TEST_CASE("line limits") {
  CHECK_THROWS_AS(parse_line(LogSource::generic, ""), Error);
  CHECK_THROWS_AS(parse_line(LogSource::generic, "\n"), Error);
  std::string big(kMaxLineSize, 'a');
  CHECK_NOTHROW(parse_line(LogSource::generic, big));
  big.push_back('b');
  CHECK_THROWS_AS(parse_line(LogSource::generic, big), Error);
}

TEST_CASE("chunking boundaries") {
  CHECK(chunk_entry(Bytes(100, 'x')).size() == 1);
  CHECK_FALSE(chunk_entry(Bytes(100, 'x'))[0].continuation);
  auto c254 = chunk_entry(Bytes(254, 'x'));
  CHECK(c254.size() == 1);
  CHECK_FALSE(c254[0].continuation);
  auto c255 = chunk_entry(Bytes(255, 'x'));
  REQUIRE(c255.size() == 2);
  CHECK(c255[0].continuation);
  CHECK_FALSE(c255[1].continuation);
  CHECK(c255[0].payload.size() == 254);
  CHECK(c255[1].payload.size() == 1);
  auto c0 = chunk_entry(Bytes{});
  CHECK(c0.size() == 1);
  CHECK(c0[0].payload.empty());
}

TEST_CASE("random bodies reassemble byte for byte") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    std::size_t len = t == 0 ? 10240 : rng() % 3000;
    Bytes body(len);
    for (auto& b : body) b = static_cast<std::uint8_t>(rng());
    auto chunks = chunk_entry(body);
    Bytes back;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      CHECK(chunks[i].payload.size() <= kMaxChunkPayload);
      CHECK(chunks[i].continuation == (i + 1 < chunks.size()));
      back.insert(back.end(), chunks[i].payload.begin(), chunks[i].payload.end());
      TextField f = encode_text_field(chunks[i].payload, chunks[i].continuation);
      std::uint16_t prefix = static_cast<std::uint16_t>((f[0] << 8) | f[1]);
      CHECK((prefix & 0x0FFF) == chunks[i].payload.size());
      CHECK(((prefix & 0x1000) != 0) == chunks[i].continuation);
      CHECK((prefix & 0xE000) == 0);
    }
    CHECK(back == body);
  }
}

TEST_CASE("1000 single-chunk entries with m=100, c=1 give 10 blocks in 10 groups") {
  TempDir t;
  LogDevice d = LogDevice::init(t.path() / "s", ChainParams::make(1, 100));
  std::mt19937_64 rng(3);
  std::vector<std::string> lines;
  for (int i = 0; i < 1000; ++i) lines.push_back(testutil::random_text(rng, 1 + rng() % 200));
  std::istringstream in(lines_of(lines));
  IngestStats st = ingest(d, in, LogSource::generic);
  CHECK(st.entries == 1000);
  CHECK(st.records == 1000);
  CHECK(st.blocks == 10);
  CHECK(st.groups == 10);
  CHECK(st.parse_warnings == 0);
  CHECK(d.store().block_ids().size() == 10);
  for (std::uint32_t g = 0; g < 10; ++g) CHECK(d.store().has_ik(g));
  auto rep = full_verify(d, Bytes(32, 9));
  CHECK(rep.ok);
  CHECK(reassemble(load_all(d.store())) == lines);
}

TEST_CASE("95 entries then flush give one signed, sealed partial block") {
  TempDir t;
  LogDevice d = LogDevice::init(t.path() / "s", ChainParams::make(4, 100));
  for (int i = 0; i < 95; ++i) d.append(as_bytes("entry " + std::to_string(i)));
  CHECK(d.store().block_ids().empty());
  CHECK(d.stats().unsealed_records == 95);
  d.flush();
  REQUIRE(d.store().block_ids() == std::vector<std::uint32_t>{0});
  Block b = d.store().load_block(0);
  CHECK(b.records.size() == 95);
  CHECK(verify_block_public(b, d.identity().public_key()) == BlockStatus::ok);
  CHECK(d.store().state()->latest_msg_count == 95);
  CHECK(d.stats().unsealed_records == 0);
  CHECK(full_verify(d, Bytes(32, 1)).ok);
}

TEST_CASE("multi-chunk entries: record count matches an independent recount") {
  TempDir t;
  LogDevice d = LogDevice::init(t.path() / "s", ChainParams::make(3, 7));
  std::mt19937_64 rng(5);
  std::vector<std::string> lines;
  std::uint64_t expect = 0;
  for (int i = 0; i < 300; ++i) {
    std::size_t len = 1 + rng() % 1200;
    lines.push_back(testutil::random_text(rng, len));
    // recount: peel 254-byte pieces until nothing is left
    std::size_t left = len;
    do {
      ++expect;
      left = left > 254 ? left - 254 : 0;
    } while (left > 0);
  }
  std::istringstream in(lines_of(lines));
  IngestStats st = ingest(d, in, LogSource::generic, QueueFull::block, 8);
  CHECK(st.records == expect);
  CHECK(st.entries == 300);
  auto blocks = load_all(d.store());
  std::uint64_t stored = 0;
  for (const auto& b : blocks) stored += b.records.size();
  CHECK(stored == expect);
  CHECK(reassemble(blocks) == lines);
  CHECK(full_verify(d, Bytes(32, 2)).ok);
}

TEST_CASE("groups commit together and epochs flush on time") {
  TempDir t;
  ManualClock clk;
  DeviceOptions o;
  o.epoch_seconds = 10;
  o.clock = clk.fn();
  LogDevice d = LogDevice::init(t.path() / "s", ChainParams::make(4, 5), o);
  for (int i = 0; i < 15; ++i) d.append(as_bytes("x"));
  CHECK(d.stats().blocks_signed == 3);
  CHECK(d.stats().commits == 0);
  CHECK(d.stats().unsealed_records == 15);
  for (int i = 0; i < 5; ++i) d.append(as_bytes("y"));
  CHECK(d.stats().commits == 1);
  CHECK(d.store().state()->latest_block == 3);
  CHECK(d.stats().unsealed_records == 0);

  d.append(as_bytes("z"));
  CHECK_FALSE(d.tick());
  clk.now += 10;
  CHECK(d.tick());
  CHECK(d.stats().epoch_flushes == 1);
  CHECK(d.store().state()->latest_block == 4);
  CHECK(d.store().state()->latest_msg_count == 1);
  clk.now += 100;
  CHECK_FALSE(d.tick());  // nothing to flush
  CHECK(full_verify(d, Bytes(32, 3)).ok);
}

TEST_CASE("resume after flush mid-group uses the sealed IK") {
  TempDir t;
  fs::path dir = t.path() / "s";
  std::vector<std::string> texts;
  {
    LogDevice d = LogDevice::init(dir, ChainParams::make(4, 5));
    for (int i = 0; i < 12; ++i) d.append(as_bytes(texts.emplace_back("a" + std::to_string(i))));
    d.flush();
    CHECK(d.store().state()->latest_block == 2);
  }
  LogDevice d = LogDevice::open(dir);
  CHECK(d.next_block_id() == 3);
  for (int i = 0; i < 12; ++i) d.append(as_bytes(texts.emplace_back("b" + std::to_string(i))));
  d.flush();
  CHECK(reassemble(load_all(d.store())) == texts);
  CHECK(full_verify(d, Bytes(32, 4)).ok);
}

TEST_CASE("dropping the device loses at most the in-memory window") {
  TempDir t;
  fs::path dir = t.path() / "s";
  ChainParams p = ChainParams::make(3, 4);
  std::uint64_t appended = 0;
  {
    LogDevice d = LogDevice::init(dir, p);
    for (int i = 0; i < 23; ++i, ++appended) d.append(as_bytes("r" + std::to_string(i)));
    CHECK(d.stats().max_unsealed_records <= std::uint64_t{p.c} * p.m + p.m - 1);
  }
  LogDevice d = LogDevice::open(dir);
  std::uint64_t kept = 0;
  for (const auto& b : load_all(d.store())) kept += b.records.size();
  CHECK(appended - kept <= std::uint64_t{p.c} * p.m + p.m - 1);
  CHECK(kept == 12);
  d.append(as_bytes("after"));
  d.flush();
  CHECK(full_verify(d, Bytes(32, 5)).ok);
}

TEST_CASE("unsealed byte accounting stays under the memory budget") {
  struct Cell {
    std::uint32_t c, m;
    std::uint64_t cap;
  };
  for (Cell cell : {Cell{50, 100, 2u << 20}, Cell{25, 100, 1u << 20}, Cell{1, 500, 1u << 20}}) {
    TempDir t;
    LogDevice d = LogDevice::init(t.path() / "s", ChainParams::make(cell.c, cell.m));
    std::mt19937_64 rng(1);
    std::uint64_t n = std::uint64_t{cell.c} * cell.m * 2 + 7;
    for (std::uint64_t i = 0; i < n; ++i) d.append(as_bytes(testutil::random_text(rng, 115)));
    // Peak is the moment the group's last block is signed, just before commit.
    std::uint64_t worst = std::uint64_t{cell.c} * (kBlockHeaderSize + 64 + cell.m * kRecordSize);
    CHECK(d.stats().max_unsealed_bytes == worst);
    CHECK(d.stats().max_unsealed_bytes <= cell.cap);
  }
}

TEST_CASE("bounded queue: drop mode counts, block mode preserves order") {
  EntryQueue q(2, QueueFull::drop);
  RawEntry e;
  e.body = Bytes{1};
  CHECK(q.push(e));
  CHECK(q.push(e));
  CHECK_FALSE(q.push(e));
  CHECK(q.dropped() == 1);

  EntryQueue ordered(3, QueueFull::block);
  std::thread prod([&] {
    for (std::uint8_t i = 0; i < 100; ++i) {
      RawEntry x;
      x.body = Bytes{i};
      ordered.push(std::move(x));
    }
    ordered.close();
  });
  std::uint8_t expect = 0;
  bool in_order = true;
  while (auto x = ordered.pop()) in_order = in_order && x->body[0] == expect++;
  prod.join();
  CHECK(in_order);
  CHECK(expect == 100);
}

TEST_CASE("ingest counts warnings and empty lines, and halts with a position on store failure") {
  TempDir t;
  LogDevice d = LogDevice::init(t.path() / "s", ChainParams::make(1, 2));
  std::istringstream in("[ 1.0] ok\nnot dmesg\n\n[ 2.5] fine\n");
  IngestStats st = ingest(d, in, LogSource::dmesg);
  CHECK(st.lines == 4);
  CHECK(st.entries == 3);
  CHECK(st.empty_lines == 1);
  CHECK(st.parse_warnings == 1);
  CHECK(st.first_timestamp == "1.0");
  CHECK(st.last_timestamp == "2.5");

  d.set_fault_hook([](CommitStep s, std::uint64_t) {
    if (s == CommitStep::block_temp_written) fail(Errc::io_error, "disk full");
  });
  std::istringstream more("a\nb\nc\nd\n");
  try {
    ingest(d, more, LogSource::generic);
    FAIL("ingest did not halt");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::io_error);
    CHECK(std::string(e.what()).find("entry 1") != std::string::npos);
  }
}

TEST_CASE("over-long lines are split, not dropped") {
  TempDir t;
  LogDevice d = LogDevice::init(t.path() / "s", ChainParams::make(2, 50));
  std::string big(kMaxLineSize + 10, 'q');
  std::istringstream in(big + "\nshort\n");
  IngestStats st = ingest(d, in, LogSource::generic);
  CHECK(st.oversize_splits == 1);
  CHECK(st.entries == 3);
  auto back = reassemble(load_all(d.store()));
  REQUIRE(back.size() == 3);
  CHECK(back[0] + back[1] == big);
  CHECK(back[2] == "short");
}

TEST_CASE("verifier RLK export needs the provisioning key") {
  TempDir t;
  LogDevice d = LogDevice::init(t.path() / "s", ChainParams::make(2, 2));
  Bytes vk(32, 7);
  Bytes sealed = d.export_rlk(vk);
  CHECK_NOTHROW(open_verifier_rlk(sealed, vk));
  CHECK_THROWS_AS(open_verifier_rlk(sealed, Bytes(32, 8)), Error);
  CHECK_THROWS_AS(LogDevice::init(t.path() / "s", ChainParams::make(2, 2)), Error);
}

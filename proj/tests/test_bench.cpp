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

#include <cmath>
#include <sstream>

#include "bench.hpp"
#include "test_util.hpp"

using namespace emlog;
using testutil::TempDir;

namespace {

std::pair<double, double> mean_sd(const std::vector<std::string>& v) {
  double s = 0, ss = 0;
  for (const auto& x : v) s += static_cast<double>(x.size());
  double mean = s / static_cast<double>(v.size());
  for (const auto& x : v) ss += (static_cast<double>(x.size()) - mean) * (static_cast<double>(x.size()) - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

TEST_CASE("synthetic generator is deterministic under a seed") {
  std::ostringstream a, b, c;
  write_synthetic({1000, 115.08, 5.73, 7}, a);
  write_synthetic({1000, 115.08, 5.73, 7}, b);
  write_synthetic({1000, 115.08, 5.73, 8}, c);
  CHECK(a.str() == b.str());
  CHECK(a.str() != c.str());
  std::istringstream in(a.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    CHECK_FALSE(line.empty());
    for (char ch : line) CHECK((ch >= 0x20 && ch <= 0x7e));
  }
  CHECK(n == 1000);
}

TEST_CASE("synthetic lengths match the published dataset statistics") {
  auto edgar = gen_synthetic({100000, 115.08, 5.73, 1});
  auto [m1, s1] = mean_sd(edgar);
  CHECK(std::abs(m1 - 115.08) / 115.08 < 0.02);
  CHECK(std::abs(s1 - 5.73) / 5.73 < 0.05);
  auto snort = gen_synthetic({100000, 165.27, 38.21, 2});
  auto [m2, s2] = mean_sd(snort);
  CHECK(std::abs(m2 - 165.27) / 165.27 < 0.02);
  CHECK(std::abs(s2 - 38.21) / 38.21 < 0.05);
}

TEST_CASE("synthetic lengths are clamped") {
  auto v = gen_synthetic({2000, 2, 50, 3});
  for (const auto& s : v) {
    CHECK(s.size() >= 1);
    CHECK(s.size() <= kMaxLineSize);
  }
  CHECK_THROWS_AS(gen_synthetic({10, 0.5, 1, 1}), Error);
}

TEST_CASE("linear fit") {
  auto f = LinearFit::of({1, 2, 3, 4}, {5, 7, 9, 11});
  CHECK(f.slope == doctest::Approx(2));
  CHECK(f.intercept == doctest::Approx(3));
  CHECK(f.r2 == doctest::Approx(1));
  // Hand-computed: x = 0,1,2; y = 0,2,1 -> slope 0.5, intercept 0.5, r2 = 0.25.
  auto g = LinearFit::of({0, 1, 2}, {0, 2, 1});
  CHECK(g.slope == doctest::Approx(0.5));
  CHECK(g.intercept == doctest::Approx(0.5));
  CHECK(g.r2 == doctest::Approx(0.25));
}

TEST_CASE("storage points match the format arithmetic") {
  TempDir t;
  auto entries = gen_synthetic({5000, 115.08, 5.73, 4});
  auto pts = bench_storage({10, 100, 250}, entries, t.path());
  REQUIRE(pts.size() == 3);
  for (const auto& p : pts) {
    CHECK(p.sealed_bytes == 42 + 13 + 64 + 292 * std::uint64_t{p.m});
    CHECK(p.sealed_bytes == p.expected_bytes);
    CHECK(p.overhead > 2.0);
    CHECK(p.overhead < 5.0);
  }
}

TEST_CASE("cell counts are reproducible; only timings vary") {
  TempDir t;
  BenchConfig cfg;
  cfg.min_entries = 600;
  cfg.min_timing_seconds = 0.001;
  auto entries = gen_synthetic({3000, 115.08, 5.73, 9});
  CellResult a = bench_cell(3, 50, entries, cfg, t.path(), 3, false);
  CellResult b = bench_cell(3, 50, entries, cfg, t.path(), 3, true);
  CHECK(a.entries == 600);
  CHECK(a.blocks == 12);
  CHECK(a.groups == 4);
  CHECK(a.entries == b.entries);
  CHECK(a.blocks == b.blocks);
  CHECK(a.groups == b.groups);
  CHECK(a.max_unsealed_bytes == b.max_unsealed_bytes);
  CHECK(a.block_create_ms.size() == 3);
  CHECK(a.throughput.mean > 0);
}

TEST_CASE("parallel verification agrees with serial") {
  std::mt19937_64 rng(2);
  RootLoggingKey rlk = testutil::random_rlk(rng);
  ChainParams p = ChainParams::make(3, 6);
  DeviceIdentity id = DeviceIdentity::create(Role::device);
  auto blocks = testutil::build_chain(rlk, p, id, 0, 9, 6, rng);
  blocks[4].records[2].text[10] ^= 1;
  auto s = verify_blocks_parallel(blocks, rlk, p, id.public_key(), 1);
  auto par = verify_blocks_parallel(blocks, rlk, p, id.public_key(), 4);
  REQUIRE(s.size() == par.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s[i].status == par[i].status);
    CHECK(s[i].bad_hmac == par[i].bad_hmac);
  }
  CHECK(par[4].status == BlockStatus::bad_hmac);
}

TEST_CASE("bench config parsing") {
  auto cfg = BenchConfig::from_json(R"({"count": 100, "m_values": [5, 6], "repetitions": 4})");
  CHECK(cfg.synthetic.count == 100);
  CHECK(cfg.m_values == std::vector<std::uint32_t>{5, 6});
  CHECK(cfg.repetitions == 4);
  CHECK_THROWS_AS(BenchConfig::from_json(R"({"repetitions": 2})"), Error);
  CHECK_THROWS_AS(BenchConfig::from_json(R"({"colour": 1})"), Error);
  CHECK_THROWS_AS(BenchConfig::from_json(R"({"m_values": [0]})"), Error);
  CHECK_THROWS_AS(BenchConfig::from_json(R"({"count": "x"})"), Error);
  CHECK_THROWS_AS(BenchConfig::from_json("[1]"), Error);
  auto round = BenchConfig::from_json(cfg.to_json());
  CHECK(round.m_values == cfg.m_values);
}

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

#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "json.hpp"

namespace emlog {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

// Producer-side block creation without storage: keys, tags and signature.
std::vector<Block> make_blocks(const RootLoggingKey& rlk, const ChainParams& p, const DeviceIdentity& id,
                               std::uint32_t count, const std::vector<std::string>& entries, std::size_t& cursor) {
  std::vector<Block> out;
  out.reserve(count);
  std::optional<BlockKey> bk;
  for (std::uint32_t b = 0; b < count; ++b) {
    if (p.starts_group(b)) {
      IntermediateKey ik = derive_ik(rlk, p.group_of(b));
      bk = first_block_key(ik, b, p);
    } else {
      bk = next_block_key(*bk, b, p);
    }
    BlockBuilder builder(b);
    MessageKey k = first_message_key(*bk);
    for (std::uint32_t i = 0; i < p.m; ++i) {
      const std::string& e = entries[cursor++ % entries.size()];
      ByteView text = as_bytes(e).first(std::min(e.size(), kMaxChunkPayload));
      if (i + 1 < p.m) {
        MessageKey src = k.clone();
        MessageKey next = next_message_key(src, p);
        builder.append(text, k);
        k = std::move(next);
      } else {
        builder.append(text, k);
      }
    }
    out.push_back(sign_block(std::move(builder), id));
  }
  return out;
}

std::uint64_t memory_budget(std::uint32_t c, std::uint32_t m) {
  return std::uint64_t{c} * m >= 5000 ? (2u << 20) : (1u << 20);
}

void run_cell_once(CellResult& r, const std::vector<std::string>& entries, const BenchConfig& cfg,
                   const fs::path& workdir, unsigned rep, bool record) {
  const ChainParams p = ChainParams::make(r.c, r.m);
  DeviceIdentity id = DeviceIdentity::create(Role::device);
  RootLoggingKey rlk = RootLoggingKey::generate();
  std::size_t cursor = 0;

  // Block creation and verification, widened until the timer has enough to see.
  std::uint32_t nb = std::max<std::uint32_t>(4, 2000 / r.m);
  std::vector<Block> blocks;
  double create_s = 0;
  for (;;) {
    double t0 = now_seconds();
    blocks = make_blocks(rlk, p, id, nb, entries, cursor);
    create_s = now_seconds() - t0;
    if (create_s >= cfg.min_timing_seconds || nb >= (1u << 16)) break;
    nb *= 2;
  }
  double t0 = now_seconds();
  auto ver = verify_blocks_parallel(blocks, rlk, p, id.public_key(), cfg.verify_threads);
  double verify_s = now_seconds() - t0;
  for (const auto& v : ver)
    if (v.status != BlockStatus::ok) fail(Errc::integrity_alarm, "benchmark produced a block that does not verify");

  // Device path: tagging, signing, sealing and commits through the store.
  std::uint64_t group_records = std::uint64_t{r.c} * r.m;
  std::uint64_t n = std::max<std::uint64_t>(cfg.min_entries, 2 * group_records);
  n = (n + group_records - 1) / group_records * group_records;
  fs::path dir = workdir / ("cell-c" + std::to_string(r.c) + "-m" + std::to_string(r.m) + "-r" + std::to_string(rep) +
                            (record ? "" : "-warm"));
  fs::remove_all(dir);
  DeviceStats st;
  double dev_s = 0;
  {
    LogDevice d = LogDevice::init(dir, p);
    double d0 = now_seconds();
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::string& e = entries[cursor++ % entries.size()];
      d.append(as_bytes(e));
    }
    d.flush();
    dev_s = now_seconds() - d0;
    st = d.stats();
  }
  fs::remove_all(dir);

  if (!record) return;
  r.block_create_ms.push_back(create_s / nb * 1e3);
  r.block_verify_ms.push_back(verify_s / nb * 1e3);
  r.group_create_ms.push_back(st.commits ? dev_s / static_cast<double>(st.commits) * 1e3 : 0);
  r.logs_per_second.push_back(dev_s > 0 ? static_cast<double>(n) / dev_s : 0);
  r.entries = n;
  r.blocks = st.blocks_signed;
  r.groups = st.commits;
  r.max_unsealed_bytes = std::max(r.max_unsealed_bytes, st.max_unsealed_bytes);
  r.memory_budget = memory_budget(r.c, r.m);
  r.memory_ok = r.max_unsealed_bytes <= r.memory_budget;
}

void summarise(CellResult& r) {
  r.block_create = Stat::of(r.block_create_ms);
  r.block_verify = Stat::of(r.block_verify_ms);
  r.group_create = Stat::of(r.group_create_ms);
  r.throughput = Stat::of(r.logs_per_second);
}

json stat_json(const Stat& s) { return json{{"mean", s.mean}, {"stddev", s.stddev}}; }

json cell_json(const CellResult& r) {
  return json{{"c", r.c},
              {"m", r.m},
              {"entries", r.entries},
              {"blocks", r.blocks},
              {"groups", r.groups},
              {"block_create_ms", stat_json(r.block_create)},
              {"block_verify_ms", stat_json(r.block_verify)},
              {"group_create_ms", stat_json(r.group_create)},
              {"logs_per_second", stat_json(r.throughput)},
              {"logs_per_second_runs", r.logs_per_second},
              {"block_create_ms_runs", r.block_create_ms},
              {"max_unsealed_bytes", r.max_unsealed_bytes},
              {"memory_budget_bytes", r.memory_budget},
              {"memory_ok", r.memory_ok}};
}

std::vector<std::string> load_entries(const BenchConfig& cfg) {
  if (!cfg.dataset) return gen_synthetic(cfg.synthetic);
  std::ifstream in(*cfg.dataset);
  if (!in) fail(Errc::io_error, "cannot read dataset " + cfg.dataset->string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line.substr(0, kMaxLineSize));
  if (out.empty()) fail(Errc::invalid_parameter, "dataset has no entries");
  return out;
}

}  // namespace

std::vector<std::string> gen_synthetic(const SyntheticSpec& spec) {
  if (!(spec.mean >= 1)) fail(Errc::invalid_parameter, "synthetic mean must be at least 1");
  if (!(spec.stddev >= 0)) fail(Errc::invalid_parameter, "synthetic stddev must be non-negative");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> len(spec.mean, spec.stddev);
  std::uniform_int_distribution<int> ch(0x21, 0x7e);
  std::vector<std::string> out;
  out.reserve(spec.count);
  for (std::uint64_t i = 0; i < spec.count; ++i) {
    double l = spec.stddev > 0 ? std::round(len(rng)) : std::round(spec.mean);
    auto n = static_cast<std::size_t>(std::clamp(l, 1.0, static_cast<double>(kMaxLineSize)));
    std::string s(n, ' ');
    for (std::size_t k = 0; k < n; ++k) {
      // Spaces between words, never at the ends.
      bool space = k > 0 && k + 1 < n && rng() % 7 == 0;
      s[k] = space ? ' ' : static_cast<char>(ch(rng));
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_synthetic(const SyntheticSpec& spec, std::ostream& out) {
  for (const auto& s : gen_synthetic(spec)) out << s << '\n';
}

Stat Stat::of(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double acc = 0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  }
  return s;
}

LinearFit LinearFit::of(const std::vector<double>& x, const std::vector<double>& y) {
  LinearFit f;
  const auto n = static_cast<double>(x.size());
  if (x.size() < 2 || x.size() != y.size()) return f;
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double e = y[i] - (f.slope * x[i] + f.intercept);
    ss_res += e * e;
  }
  f.r2 = syy == 0 ? 1.0 : 1.0 - ss_res / syy;
  return f;
}

std::vector<BlockVerification> verify_blocks_parallel(const std::vector<Block>& blocks, const RootLoggingKey& rlk,
                                                      const ChainParams& params, const crypto::PublicKey& pk,
                                                      unsigned threads) {
  std::vector<BlockVerification> out(blocks.size());
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(blocks.size())));
  if (threads <= 1) {
    for (std::size_t i = 0; i < blocks.size(); ++i) out[i] = verify_block_full(blocks[i], rlk, params, pk);
    return out;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < blocks.size(); i += threads) out[i] = verify_block_full(blocks[i], rlk, params, pk);
    });
  for (auto& th : pool) th.join();
  return out;
}

CellResult bench_cell(std::uint32_t c, std::uint32_t m, const std::vector<std::string>& entries,
                      const BenchConfig& cfg, const fs::path& workdir, unsigned repetitions, bool warmup) {
  CellResult r;
  r.c = c;
  r.m = m;
  if (warmup) run_cell_once(r, entries, cfg, workdir, 0, false);
  for (unsigned rep = 0; rep < repetitions; ++rep) run_cell_once(r, entries, cfg, workdir, rep, true);
  summarise(r);
  return r;
}

std::vector<StoragePoint> bench_storage(const std::vector<std::uint32_t>& m_values,
                                        const std::vector<std::string>& entries, const fs::path& workdir) {
  std::vector<StoragePoint> out;
  std::size_t cursor = 0;
  for (std::uint32_t m : m_values) {
    fs::path dir = workdir / ("storage-m" + std::to_string(m));
    fs::remove_all(dir);
    StoragePoint pt;
    pt.m = m;
    {
      LogDevice d = LogDevice::init(dir, ChainParams::make(1, m));
      std::uint64_t records = 0;
      while (records < m) {
        const std::string& e = entries[cursor++ % entries.size()];
        if (records + chunk_count(e.size()) > m) continue;  // keep exactly one full block
        d.append(as_bytes(e));
        records += chunk_count(e.size());
        pt.raw_bytes += e.size();
      }
      d.flush();
      pt.sealed_bytes = d.store().block_file_size(0);
    }
    pt.expected_bytes = expected_block_file_size(m);
    pt.overhead = pt.raw_bytes ? static_cast<double>(pt.sealed_bytes) / static_cast<double>(pt.raw_bytes) : 0;
    out.push_back(pt);
    fs::remove_all(dir);
  }
  return out;
}

BenchReport bench_grid(const BenchConfig& cfg) {
  cfg.validate();
  std::vector<std::string> entries = load_entries(cfg);

  bool own_dir = cfg.workdir.empty();
  fs::path workdir = cfg.workdir;
  if (own_dir) {
    std::random_device rd;
    workdir = fs::temp_directory_path() / ("emlog-bench-" + std::to_string(rd()) + std::to_string(rd()));
  }
  fs::create_directories(workdir);

  BenchReport rep;
  rep.repetitions = cfg.repetitions;
  double total = 0;
  for (const auto& e : entries) total += static_cast<double>(e.size());
  rep.dataset_mean_length = total / static_cast<double>(entries.size());

  auto cell = [](std::uint32_t c, std::uint32_t m) {
    CellResult r;
    r.c = c;
    r.m = m;
    return r;
  };
  for (auto m : cfg.m_values) rep.m_sweep.push_back(cell(cfg.m_sweep_c, m));
  for (auto c : cfg.c_values) rep.c_sweep.push_back(cell(c, cfg.c_sweep_m));

  try {
    // Warm-up pass, then repetitions interleaved across cells so drift hits every cell alike.
    for (auto* sweep : {&rep.m_sweep, &rep.c_sweep})
      for (auto& cell : *sweep) run_cell_once(cell, entries, cfg, workdir, 0, false);
    for (unsigned r = 0; r < cfg.repetitions; ++r)
      for (auto* sweep : {&rep.m_sweep, &rep.c_sweep})
        for (auto& cell : *sweep) run_cell_once(cell, entries, cfg, workdir, r, true);
    rep.storage = bench_storage(cfg.storage_m_values, entries, workdir);
  } catch (...) {
    if (own_dir) fs::remove_all(workdir);
    throw;
  }
  if (own_dir) fs::remove_all(workdir);

  for (auto& c : rep.m_sweep) summarise(c);
  for (auto& c : rep.c_sweep) summarise(c);

  rep.t1_monotone_in_m = rep.m_sweep.size() >= 2;
  for (std::size_t i = 1; i < rep.m_sweep.size(); ++i)
    rep.t1_monotone_in_m = rep.t1_monotone_in_m && rep.m_sweep[i].block_create.mean > rep.m_sweep[i - 1].block_create.mean;

  auto find_c = [&](std::uint32_t c) -> const CellResult* {
    for (const auto& cell : rep.c_sweep)
      if (cell.c == c) return &cell;
    return nullptr;
  };
  const CellResult* c1 = find_c(1);
  const CellResult* c25 = find_c(25);
  if (c1 && c25) {
    for (unsigned r = 0; r < cfg.repetitions; ++r)
      rep.t2_wins += c25->logs_per_second[r] >= c1->logs_per_second[r];
    rep.t2_holds = rep.t2_wins * 3 >= cfg.repetitions * 2;
  }

  rep.throughput_floor_ok = true;
  bool any_floor_cell = false;
  for (const auto& cell : rep.c_sweep)
    if (cell.c >= 10 && cell.m == 100) {
      any_floor_cell = true;
      double worst = *std::min_element(cell.logs_per_second.begin(), cell.logs_per_second.end());
      rep.throughput_floor_ok = rep.throughput_floor_ok && worst > kThroughputFloor;
    }
  rep.throughput_floor_ok = rep.throughput_floor_ok && any_floor_cell;

  std::vector<double> xs, ys;
  rep.storage_arithmetic_ok = !rep.storage.empty();
  rep.overhead_ok = true;
  for (const auto& p : rep.storage) {
    xs.push_back(p.m);
    ys.push_back(static_cast<double>(p.sealed_bytes));
    rep.storage_arithmetic_ok = rep.storage_arithmetic_ok && p.sealed_bytes == p.expected_bytes;
    if (p.m >= 250) rep.overhead_ok = rep.overhead_ok && p.overhead <= 5.0;
  }
  rep.storage_fit = LinearFit::of(xs, ys);
  rep.storage_linear_ok = rep.storage_fit.r2 >= 0.999;

  rep.memory_ok = true;
  for (const auto* sweep : {&rep.m_sweep, &rep.c_sweep})
    for (const auto& cell : *sweep) rep.memory_ok = rep.memory_ok && cell.memory_ok;
  return rep;
}

std::string BenchReport::to_json() const {
  json j;
  j["repetitions"] = repetitions;
  j["dataset_mean_length"] = dataset_mean_length;
  j["m_sweep"] = json::array();
  for (const auto& c : m_sweep) j["m_sweep"].push_back(cell_json(c));
  j["c_sweep"] = json::array();
  for (const auto& c : c_sweep) j["c_sweep"].push_back(cell_json(c));
  j["storage"] = json::array();
  for (const auto& p : storage)
    j["storage"].push_back(json{{"m", p.m},
                                {"sealed_bytes", p.sealed_bytes},
                                {"expected_bytes", p.expected_bytes},
                                {"raw_bytes", p.raw_bytes},
                                {"overhead", p.overhead}});
  j["storage_fit"] = json{{"slope", storage_fit.slope}, {"intercept", storage_fit.intercept}, {"r2", storage_fit.r2}};
  j["checks"] = json{{"t1_monotone_in_m", t1_monotone_in_m},
                     {"t2_wins", t2_wins},
                     {"t2_holds", t2_holds},
                     {"throughput_floor_ok", throughput_floor_ok},
                     {"storage_linear_ok", storage_linear_ok},
                     {"storage_arithmetic_ok", storage_arithmetic_ok},
                     {"overhead_ok", overhead_ok},
                     {"memory_ok", memory_ok},
                     {"passed", passed()}};
  return j.dump(2);
}

// ---- config --------------------------------------------------------------------

void BenchConfig::validate() const {
  if (repetitions < 3) fail(Errc::invalid_parameter, "repetitions must be at least 3");
  for (const auto* v : {&m_values, &c_values, &storage_m_values})
    for (auto x : *v)
      if (x == 0) fail(Errc::invalid_parameter, "grid values must be positive");
  if (m_sweep_c == 0 || c_sweep_m == 0) fail(Errc::invalid_parameter, "grid values must be positive");
  if (!(synthetic.mean >= 1)) fail(Errc::invalid_parameter, "synthetic mean must be at least 1");
  if (synthetic.count == 0 && !dataset) fail(Errc::invalid_parameter, "synthetic count must be positive");
  if (verify_threads == 0) fail(Errc::invalid_parameter, "verify_threads must be at least 1");
}

BenchConfig BenchConfig::from_json(std::string_view text) {
  BenchConfig cfg;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(Errc::invalid_parameter, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(Errc::invalid_parameter, "config must be a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const json& v = it.value();
      if (k == "count") cfg.synthetic.count = v.get<std::uint64_t>();
      else if (k == "mean") cfg.synthetic.mean = v.get<double>();
      else if (k == "stddev") cfg.synthetic.stddev = v.get<double>();
      else if (k == "seed") cfg.synthetic.seed = v.get<std::uint64_t>();
      else if (k == "dataset") cfg.dataset = v.get<std::string>();
      else if (k == "m_values") cfg.m_values = v.get<std::vector<std::uint32_t>>();
      else if (k == "c_values") cfg.c_values = v.get<std::vector<std::uint32_t>>();
      else if (k == "m_sweep_c") cfg.m_sweep_c = v.get<std::uint32_t>();
      else if (k == "c_sweep_m") cfg.c_sweep_m = v.get<std::uint32_t>();
      else if (k == "storage_m_values") cfg.storage_m_values = v.get<std::vector<std::uint32_t>>();
      else if (k == "repetitions") cfg.repetitions = v.get<unsigned>();
      else if (k == "min_entries") cfg.min_entries = v.get<std::uint64_t>();
      else if (k == "min_timing_seconds") cfg.min_timing_seconds = v.get<double>();
      else if (k == "verify_threads") cfg.verify_threads = v.get<unsigned>();
      else if (k == "workdir") cfg.workdir = v.get<std::string>();
      else fail(Errc::invalid_parameter, "unknown config key: " + k);
    }
  } catch (const json::exception& e) {
    fail(Errc::invalid_parameter, std::string("config value has the wrong type: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string BenchConfig::to_json() const {
  json j{{"count", synthetic.count},
         {"mean", synthetic.mean},
         {"stddev", synthetic.stddev},
         {"seed", synthetic.seed},
         {"m_values", m_values},
         {"c_values", c_values},
         {"m_sweep_c", m_sweep_c},
         {"c_sweep_m", c_sweep_m},
         {"storage_m_values", storage_m_values},
         {"repetitions", repetitions},
         {"min_entries", min_entries},
         {"min_timing_seconds", min_timing_seconds},
         {"verify_threads", verify_threads}};
  if (dataset) j["dataset"] = dataset->string();
  if (!workdir.empty()) j["workdir"] = workdir.string();
  return j.dump(2);
}

}  // namespace emlog

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

// Synthetic dataset generator and the evaluation harness: timing grid over
// block length m and group size c, storage scaling, and the memory probe.

#ifndef EMLOG_BENCH_HPP
#define EMLOG_BENCH_HPP

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "collector.hpp"

namespace emlog {

struct SyntheticSpec {
  std::uint64_t count = 1000;
  double mean = 115.08;
  double stddev = 5.73;
  std::uint64_t seed = 7;
};

// Normally distributed lengths, rounded and clamped to [1, 64 KiB]; bytes are
// printable ASCII. Same spec, same output.
std::vector<std::string> gen_synthetic(const SyntheticSpec& spec);
void write_synthetic(const SyntheticSpec& spec, std::ostream& out);

struct BenchConfig {
  SyntheticSpec synthetic{100000, 115.08, 5.73, 7};
  std::optional<std::filesystem::path> dataset;  // newline-delimited; overrides synthetic
  std::vector<std::uint32_t> m_values{10, 100, 250, 500};
  std::uint32_t m_sweep_c = 1;
  std::vector<std::uint32_t> c_values{1, 10, 25, 50};
  std::uint32_t c_sweep_m = 100;
  std::vector<std::uint32_t> storage_m_values{10, 50, 100, 250, 500, 750, 1000, 2500};
  unsigned repetitions = 3;
  std::uint64_t min_entries = 5000;   // per cell and repetition
  double min_timing_seconds = 0.02;   // batches widen until a timing covers this
  unsigned verify_threads = 1;
  std::filesystem::path workdir;      // empty: a fresh directory under the system temp dir

  static BenchConfig from_json(std::string_view text);  // invalid_parameter on bad keys
  std::string to_json() const;
  void validate() const;
};

struct Stat {
  double mean = 0;
  double stddev = 0;
  static Stat of(const std::vector<double>& xs);
};

struct CellResult {
  std::uint32_t c = 0, m = 0;
  std::vector<double> block_create_ms, block_verify_ms, group_create_ms, logs_per_second;
  Stat block_create, block_verify, group_create, throughput;
  std::uint64_t entries = 0, blocks = 0, groups = 0;
  std::uint64_t max_unsealed_bytes = 0;
  std::uint64_t memory_budget = 0;
  bool memory_ok = true;
};

struct StoragePoint {
  std::uint32_t m = 0;
  std::uint64_t sealed_bytes = 0;    // one full block file
  std::uint64_t expected_bytes = 0;  // format arithmetic
  std::uint64_t raw_bytes = 0;       // the entries in that block
  double overhead = 0;               // sealed / raw
};

struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0;
  static LinearFit of(const std::vector<double>& x, const std::vector<double>& y);
};

struct BenchReport {
  std::vector<CellResult> m_sweep, c_sweep;
  std::vector<StoragePoint> storage;
  LinearFit storage_fit;
  double dataset_mean_length = 0;
  unsigned repetitions = 0;

  bool t1_monotone_in_m = false;
  unsigned t2_wins = 0;  // repetitions with throughput(c=25) >= throughput(c=1)
  bool t2_holds = false;
  bool throughput_floor_ok = false;   // > 625 logs/s at c >= 10, m = 100
  bool storage_linear_ok = false;     // r2 >= 0.999
  bool storage_arithmetic_ok = false; // measured == expected for every m
  bool overhead_ok = false;           // <= 5x for m >= 250
  bool memory_ok = false;

  bool passed() const {
    return t1_monotone_in_m && t2_holds && throughput_floor_ok && storage_linear_ok && storage_arithmetic_ok &&
           overhead_ok && memory_ok;
  }
  std::string to_json() const;
};

inline constexpr double kThroughputFloor = 625.0;

// Sealed size of one block file holding m records.
inline std::uint64_t expected_block_file_size(std::uint64_t m) {
  return kSealOverhead + kBlockHeaderSize + crypto::kSignatureSize + m * kRecordSize;
}

BenchReport bench_grid(const BenchConfig& cfg);

// Pieces of the grid, exposed for tests.
CellResult bench_cell(std::uint32_t c, std::uint32_t m, const std::vector<std::string>& entries,
                      const BenchConfig& cfg, const std::filesystem::path& workdir, unsigned repetitions,
                      bool warmup);
std::vector<StoragePoint> bench_storage(const std::vector<std::uint32_t>& m_values,
                                        const std::vector<std::string>& entries,
                                        const std::filesystem::path& workdir);

// Verifies blocks in parallel; results in input order.
std::vector<BlockVerification> verify_blocks_parallel(const std::vector<Block>& blocks, const RootLoggingKey& rlk,
                                                      const ChainParams& params, const crypto::PublicKey& pk,
                                                      unsigned threads);

}  // namespace emlog

#endif  // EMLOG_BENCH_HPP

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

// Shared fixtures for the unit and acceptance suites.

#ifndef EMLOG_TESTS_TEST_UTIL_HPP
#define EMLOG_TESTS_TEST_UTIL_HPP

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "logchain.hpp"

namespace testutil {

inline std::string random_text(std::mt19937_64& rng, std::size_t len) {
  std::string s(len, ' ');
  std::uniform_int_distribution<int> ch(0x20, 0x7e);
  for (auto& c : s) c = static_cast<char>(ch(rng));
  return s;
}

inline emlog::RootLoggingKey random_rlk(std::mt19937_64& rng) {
  std::array<std::uint8_t, 32> raw{};
  for (auto& b : raw) b = static_cast<std::uint8_t>(rng());
  return emlog::RootLoggingKey(raw);
}

// Builds blocks [first, first + count) the way a producer does, each with
// records_per_block records (clamped to m). Texts are returned for checks.
inline std::vector<emlog::Block> build_chain(const emlog::RootLoggingKey& rlk, const emlog::ChainParams& params,
                                             const emlog::DeviceIdentity& id, std::uint32_t first,
                                             std::uint32_t count, std::uint32_t records_per_block,
                                             std::mt19937_64& rng,
                                             std::vector<std::vector<std::string>>* texts = nullptr) {
  using namespace emlog;
  std::vector<Block> out;
  std::uniform_int_distribution<std::size_t> len(0, kMaxChunkPayload);
  for (std::uint32_t b = first; b < first + count; ++b) {
    BlockKey bk = derive_block_key(rlk, params, b);
    MessageKey k = first_message_key(bk);
    BlockBuilder builder(b);
    std::vector<std::string> block_texts;
    std::uint32_t n = std::min(records_per_block, params.m);
    for (std::uint32_t i = 0; i < n; ++i) {
      std::string t = random_text(rng, len(rng));
      MessageKey succ;
      bool has_next = i + 1 < n;
      if (has_next) {
        MessageKey tmp = k.clone();
        succ = next_message_key(tmp, params);
      }
      builder.append(as_bytes(t), k);
      if (has_next) k = std::move(succ);
      block_texts.push_back(std::move(t));
    }
    out.push_back(sign_block(std::move(builder), id));
    if (texts) texts->push_back(std::move(block_texts));
  }
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "emlog") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil

#endif  // EMLOG_TESTS_TEST_UTIL_HPP

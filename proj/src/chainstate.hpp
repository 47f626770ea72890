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

#ifndef EMLOG_CHAINSTATE_HPP
#define EMLOG_CHAINSTATE_HPP

#include <optional>

#include "bytes.hpp"

namespace emlog {

/// Monotonic record of the newest committed position. It is the witness that
/// lets an auditor tell "no more blocks" from "blocks were deleted".
struct ChainState {
  bool has_blocks = false;
  std::uint32_t latest_group = 0;
  std::uint32_t latest_block = 0;
  std::uint32_t latest_msg_count = 0;
  std::uint64_t sealed_block_count = 0;
  std::uint64_t commit_counter = 0;
  std::optional<std::uint32_t> delivered_watermark;

  // Fixed 34-byte encoding, see FORMATS.md.
  Bytes encode() const;
  static ChainState decode(ByteView data);

  // Bytes covered by the device signature on a retrieval summary.
  Bytes signing_preimage() const;

  std::optional<std::uint32_t> latest() const {
    return has_blocks ? std::optional<std::uint32_t>(latest_block) : std::nullopt;
  }

  friend bool operator==(const ChainState&, const ChainState&) = default;
};

inline constexpr std::size_t kChainStateSize = 34;

}  // namespace emlog

#endif  // EMLOG_CHAINSTATE_HPP

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

#include "chainstate.hpp"

namespace emlog {

namespace {
constexpr std::uint8_t kStateVersion = 1;
constexpr std::uint8_t kHasBlocks = 0x01;
constexpr std::uint8_t kHasWatermark = 0x02;
}  // namespace

Bytes ChainState::encode() const {
  Bytes out;
  out.reserve(kChainStateSize);
  out.push_back(kStateVersion);
  std::uint8_t flags = 0;
  if (has_blocks) flags |= kHasBlocks;
  if (delivered_watermark) flags |= kHasWatermark;
  out.push_back(flags);
  put_be32(out, latest_group);
  put_be32(out, latest_block);
  put_be32(out, latest_msg_count);
  put_be64(out, sealed_block_count);
  put_be64(out, commit_counter);
  put_be32(out, delivered_watermark.value_or(0));
  return out;
}

ChainState ChainState::decode(ByteView data) {
  Reader r(data);
  if (r.u8() != kStateVersion) fail(Errc::parse_error, "chain state: unsupported version");
  std::uint8_t flags = r.u8();
  if ((flags & ~(kHasBlocks | kHasWatermark)) != 0) fail(Errc::parse_error, "chain state: unknown flags");
  ChainState s;
  s.has_blocks = (flags & kHasBlocks) != 0;
  s.latest_group = r.be32();
  s.latest_block = r.be32();
  s.latest_msg_count = r.be32();
  s.sealed_block_count = r.be64();
  s.commit_counter = r.be64();
  std::uint32_t wm = r.be32();
  if (flags & kHasWatermark) s.delivered_watermark = wm;
  r.expect_done();
  return s;
}

Bytes ChainState::signing_preimage() const {
  Bytes out;
  put_bytes(out, as_bytes("EMLOG-STATE-V1"));
  put_bytes(out, encode());
  return out;
}

}  // namespace emlog

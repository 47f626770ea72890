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

#ifndef EMLOG_ERROR_HPP
#define EMLOG_ERROR_HPP

#include <stdexcept>
#include <string>

namespace emlog {

// Values match emlog_status in include/emlog/emlog.h.
enum class Errc : int {
  ok = 0,
  invalid_parameter = 1,
  key_unavailable = 2,
  block_full = 3,
  key_misuse = 4,
  parse_error = 5,
  auth_failure = 6,
  io_error = 7,
  already_exists = 8,
  negotiation_failure = 9,
  replay_detected = 10,
  integrity_alarm = 11,
  crypto_failure = 12,
  not_found = 13,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace emlog

#endif  // EMLOG_ERROR_HPP

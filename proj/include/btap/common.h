// Copyright 2026 The btap Authors.
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

#ifndef BTAP_COMMON_H_
#define BTAP_COMMON_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace btap {

// Library-wide error type.  Thrown for contract violations (shape
// mismatches, non-finite values, bad configs, corrupt files).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

// Coordinate convention, fixed repo-wide: (0, 0) is the CENTER of the
// top-left pixel, x grows rightward, y grows downward.  Every operation
// that consumes or produces coordinates (bilinear sampling, affine
// warps, track positions, soft-argmax) uses this convention; image
// resampling and point warping must stay pixel-aligned under it.
struct XY {
  double x = 0.0;
  double y = 0.0;
};

}  // namespace btap

#endif  // BTAP_COMMON_H_

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

#ifndef BTAP_RNG_H_
#define BTAP_RNG_H_

#include <cstdint>
#include <string>

namespace btap {

// Splittable counter-based RNG (SplitMix64 core).  Streams derived via
// split() are statistically independent and fully determined by the
// root seed plus the split labels, so parallel workers can draw
// reproducibly without sharing state.  All distributions are
// implemented by hand; nothing here depends on libstdc++
// implementation details, so sequences are stable across platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  // Derives an independent child stream keyed by a label.
  Rng split(uint64_t label) const;
  Rng split(const std::string& label) const;

  uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n);
  // Standard normal (Box-Muller, no cached spare: two draws per call).
  double normal();

 private:
  uint64_t state_;
};

}  // namespace btap

#endif  // BTAP_RNG_H_

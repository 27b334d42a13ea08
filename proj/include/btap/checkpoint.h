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

#ifndef BTAP_CHECKPOINT_H_
#define BTAP_CHECKPOINT_H_

#include <map>
#include <string>
#include <vector>

#include "btap/tracker.h"

namespace btap {

// Versioned binary container: magic "BTAP", u32 version, u32 tensor
// count, then per tensor: u32 name length + UTF-8 name, u8 dtype tag
// (0 = f32), u32 rank, u64 dims, little-endian f32 payload.  Name
// prefixes "opt." (optimizer state) and "teacher." (EMA parameters) are
// reserved; bare names are student parameters, "config." entries are
// scalar architecture knobs.
struct CheckpointEntry {
  Shape shape;
  std::vector<double> data;
};
using CheckpointMap = std::map<std::string, CheckpointEntry>;

constexpr uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::string& path, const CheckpointMap& entries);
CheckpointMap read_checkpoint(const std::string& path);

// Model <-> container plumbing.  `prefix` is "" for the student and
// "teacher." for the EMA copy; config knobs are stored once, unprefixed.
void params_to_checkpoint(const ModelParams& params, const std::string& prefix,
                          CheckpointMap& out);
ModelParams params_from_checkpoint(const CheckpointMap& entries,
                                   const std::string& prefix);
bool checkpoint_has_prefix(const CheckpointMap& entries,
                           const std::string& prefix);

}  // namespace btap

#endif  // BTAP_CHECKPOINT_H_

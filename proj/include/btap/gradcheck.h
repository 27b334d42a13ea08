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

#ifndef BTAP_GRADCHECK_H_
#define BTAP_GRADCHECK_H_

#include <functional>
#include <string>
#include <vector>

#include "btap/rng.h"
#include "btap/tensor.h"

namespace btap {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "leaf_index:entry analytic=... numeric=..."
  bool ok(double tol) const { return max_rel_err <= tol; }
};

// Central finite-difference check of reverse-mode gradients.
//
// `f` must rebuild its graph from scratch on every call, reading the
// current values of `leaves` (the function is re-evaluated with each
// checked entry nudged by +/-h).  The finite-difference quotient
// (f(x+h) - f(x-h)) / (2h) is the independent oracle; it never touches
// the backward pass.  Relative error uses
// |a - n| / max(|a|, |n|, 1e-3), i.e. it degrades to an absolute check
// for near-zero gradients.
//
// `max_entries_per_leaf` < 0 checks every entry; otherwise a random
// subset (deterministic via `rng`) of that size per leaf.
GradCheckResult grad_check(const std::function<Tensor()>& f,
                           const std::vector<Tensor>& leaves,
                           double h = 1e-5, int max_entries_per_leaf = -1,
                           Rng rng = Rng(0));

}  // namespace btap

#endif  // BTAP_GRADCHECK_H_

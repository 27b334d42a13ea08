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

#include "btap/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace btap {

GradCheckResult grad_check(const std::function<Tensor()>& f,
                           const std::vector<Tensor>& leaves, double h,
                           int max_entries_per_leaf, Rng rng) {
  Tensor loss = f();
  GradMap grads = backward(loss);
  GradCheckResult res;
  for (size_t li = 0; li < leaves.size(); ++li) {
    Node* leaf = leaves[li].raw();
    const std::vector<double>* g = grads.find(leaf);
    std::vector<double> analytic =
        g ? *g : std::vector<double>(leaf->numel(), 0.0);
    std::vector<int64_t> entries;
    if (max_entries_per_leaf < 0 ||
        leaf->numel() <= max_entries_per_leaf) {
      for (int64_t i = 0; i < leaf->numel(); ++i) entries.push_back(i);
    } else {
      for (int j = 0; j < max_entries_per_leaf; ++j) {
        entries.push_back(
            static_cast<int64_t>(rng.uniform_int(leaf->numel())));
      }
    }
    for (int64_t i : entries) {
      double saved = leaf->value[i];
      leaf->value[i] = saved + h;
      double lp = f().item();
      leaf->value[i] = saved - h;
      double lm = f().item();
      leaf->value[i] = saved;
      double numeric = (lp - lm) / (2.0 * h);
      double a = analytic[i];
      double denom = std::max({std::abs(a), std::abs(numeric), 1e-3});
      double rel = std::abs(a - numeric) / denom;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        std::ostringstream os;
        os << "leaf " << li << " entry " << i << " analytic=" << a
           << " numeric=" << numeric;
        res.worst = os.str();
      }
    }
  }
  return res;
}

}  // namespace btap

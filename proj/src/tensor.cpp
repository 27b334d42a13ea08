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

#include "btap/tensor.h"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace btap {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    require(d >= 1, "shape extents must be >= 1");
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void GradMap::accumulate(const Node* node, const std::vector<double>& contrib) {
  auto& g = slot(node, static_cast<int64_t>(contrib.size()));
  for (size_t i = 0; i < contrib.size(); ++i) g[i] += contrib[i];
}

std::vector<double>* GradMap::find(const Node* node) {
  auto it = grads_.find(node);
  return it == grads_.end() ? nullptr : &it->second;
}

const std::vector<double>* GradMap::find(const Node* node) const {
  auto it = grads_.find(node);
  return it == grads_.end() ? nullptr : &it->second;
}

std::vector<double>& GradMap::slot(const Node* node, int64_t numel) {
  auto it = grads_.find(node);
  if (it == grads_.end()) {
    it = grads_.emplace(node, std::vector<double>(numel, 0.0)).first;
  }
  return it->second;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, double v, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value.assign(shape_numel(shape), v);
  node->requires_grad = requires_grad;
  node->op_name = "leaf";
  return Tensor(node);
}

Tensor Tensor::from(const Shape& shape, std::vector<double> data,
                    bool requires_grad) {
  require(shape_numel(shape) == static_cast<int64_t>(data.size()),
          "Tensor::from: data length does not match shape " +
              shape_str(shape));
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  node->op_name = "leaf";
  return Tensor(node);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({1}, {v}, requires_grad);
}

double Tensor::item() const {
  require(numel() == 1, "item() on non-scalar tensor " + shape_str(shape()));
  return node_->value[0];
}

void check_finite(const std::vector<double>& v, const char* op_name) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      fail(std::string("non-finite value produced by op '") + op_name + "'");
    }
  }
}

GradMap backward(const Tensor& loss) {
  require(loss.defined() && loss.numel() == 1, "backward: loss must be scalar");
  // Iterative DFS post-order over grad-requiring parents; the resulting
  // sequence is a topological order with the loss last.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  if (loss.raw()->requires_grad) {
    stack.push_back({loss.raw(), 0});
    visited.insert(loss.raw());
  }
  while (!stack.empty()) {
    size_t fi = stack.size() - 1;
    Node* node = stack[fi].node;
    bool descended = false;
    while (stack[fi].next_parent < node->parents.size()) {
      Node* p = node->parents[stack[fi].next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
        descended = true;
        break;
      }
    }
    if (!descended) {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  GradMap grads;
  if (topo.empty()) return grads;
  grads.slot(loss.raw(), 1)[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    const std::vector<double>* g = grads.find(n);
    if (g == nullptr) continue;  // unreachable from the loss
    if (n->backward) n->backward(*g, grads);
  }
  return grads;
}

}  // namespace btap

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

#ifndef BTAP_TENSOR_H_
#define BTAP_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "btap/common.h"

namespace btap {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Per-backward-call gradient storage.  Gradients never live on the
// nodes themselves, so concurrent backward passes over graphs that
// share parameter nodes cannot race; each caller owns its own map.
class GradMap {
 public:
  // Accumulates `contrib` (sized node->numel) into the gradient slot of
  // `node`, creating a zero slot on first touch.
  void accumulate(const Node* node, const std::vector<double>& contrib);
  std::vector<double>* find(const Node* node);
  const std::vector<double>* find(const Node* node) const;
  std::vector<double>& slot(const Node* node, int64_t numel);
  bool contains(const Node* node) const { return grads_.count(node) != 0; }

 private:
  std::unordered_map<const Node*, std::vector<double>> grads_;
};

// One recorded op (or leaf) in the computation graph.  Values are
// immutable after construction except for leaf parameters, which the
// trainer mutates in place between steps.  `backward` receives the
// gradient of the loss w.r.t. this node's output and scatters
// contributions to the parents through the GradMap.
struct Node {
  Shape shape;
  std::vector<double> value;
  bool requires_grad = false;
  std::string op_name;
  std::vector<NodePtr> parents;
  std::function<void(const std::vector<double>& gout, GradMap& sink)> backward;

  int64_t numel() const { return static_cast<int64_t>(value.size()); }
};

// Value-semantic handle to a graph node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double v, bool requires_grad = false);
  static Tensor from(const Shape& shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return node_->numel(); }
  int64_t dim(int i) const { return node_->shape[i]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<double>& data() const { return node_->value; }
  // Trainer-only escape hatch: mutating values of a node that is part
  // of a live graph invalidates that graph.
  std::vector<double>& mutable_data() { return node_->value; }

  double item() const;
  double at(int64_t i) const { return node_->value[i]; }

  const NodePtr& node() const { return node_; }
  Node* raw() const { return node_.get(); }

 private:
  NodePtr node_;
};

// Reverse-mode pass.  `loss` must be scalar.  Visits each reachable
// node exactly once in reverse topological order; deterministic given
// the same graph (two runs yield bit-identical gradients).  Returns the
// map holding d(loss)/d(node) for every node that required grad.
GradMap backward(const Tensor& loss);

// Throws if any entry of `t` is NaN/Inf.  Every op calls this on its
// output so non-finite values surface at the op that produced them.
void check_finite(const std::vector<double>& v, const char* op_name);

}  // namespace btap

#endif  // BTAP_TENSOR_H_

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

#include <doctest.h>

#include "btap/ops.h"

using namespace btap;

TEST_CASE("loss = sum(params) gives all-ones gradient") {
  Tensor x = Tensor::from({4}, {1.0, -2.0, 3.0, 0.5}, true);
  GradMap g = backward(sum(x));
  const auto* gx = g.find(x.raw());
  REQUIRE(gx != nullptr);
  for (double v : *gx) CHECK(v == 1.0);
}

TEST_CASE("loss = 0 * f(params) gives all-zeros gradient") {
  Tensor x = Tensor::from({3}, {1.0, 2.0, 3.0}, true);
  Tensor loss = scale(sum(mul(x, x)), 0.0);
  GradMap g = backward(loss);
  const auto* gx = g.find(x.raw());
  REQUIRE(gx != nullptr);
  for (double v : *gx) CHECK(v == 0.0);
}

TEST_CASE("backward is bit-deterministic across runs") {
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tensor b = Tensor::from({3}, {0.5, -1.5, 2.0}, true);
  Tensor loss = sum(sigmoid(mul(a, b)) + exp(scale(b, 0.1)));
  GradMap g1 = backward(loss);
  GradMap g2 = backward(loss);
  for (const Tensor* t : {&a, &b}) {
    const auto* x = g1.find(t->raw());
    const auto* y = g2.find(t->raw());
    REQUIRE(x != nullptr);
    REQUIRE(y != nullptr);
    for (size_t i = 0; i < x->size(); ++i) CHECK((*x)[i] == (*y)[i]);
  }
}

TEST_CASE("diamond-shaped graphs accumulate both paths") {
  // loss = x*x + x  ->  dloss/dx = 2x + 1.
  Tensor x = Tensor::scalar(3.0, true);
  Tensor loss = sum(mul(x, x) + x);
  GradMap g = backward(loss);
  CHECK((*g.find(x.raw()))[0] == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(backward(mul(x, x)), Error);
}

TEST_CASE("non-finite op outputs surface as errors") {
  Tensor x = Tensor::from({1}, {0.0});
  CHECK_THROWS_AS(log(x), Error);
  Tensor y = Tensor::from({1}, {1.0});
  CHECK_THROWS_AS(div(y, x), Error);
}

TEST_CASE("stop_gradient blocks the path") {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor loss = sum(mul(stop_gradient(x), x));
  GradMap g = backward(loss);
  // Only the live branch contributes: d/dx = stop(x) = 2, not 2x = 4.
  CHECK((*g.find(x.raw()))[0] == doctest::Approx(2.0));
}

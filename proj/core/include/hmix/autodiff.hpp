// Copyright 2026 The hmix Authors
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

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "hmix/tensor.hpp"

namespace hmix {

class Rng;
class Tape;

/// Handle to a value recorded on a Tape.
///
/// A Var is cheap to copy; it stays valid for as long as the tape that
/// produced it is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double item() const { return value().item(); }

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run record of tensor operations.
///
/// Nodes are appended in evaluation order, so every node's inputs precede it.
/// `backward` walks the record once in reverse. Leaf nodes created from a
/// parameter tensor (`leaf`) add their gradient into that tensor's adjoint
/// buffer, once per use. A tape is meant to be confined to one thread and
/// rebuilt for every forward pass.
class Tape {
 public:
  /// Receives (tape, id of the node being differentiated).
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor& parameter);

  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates adjoints to every leaf.
  void backward(const Var& loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  /// Gradient buffer of a node; empty when the node does not need a gradient.
  std::span<double> grad(std::size_t id) { return nodes_[id].grad; }
  std::span<const double> grad(std::size_t id) const { return nodes_[id].grad; }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Tensor* parameter = nullptr;
    bool needs_grad = false;
    std::vector<double> grad;
  };
  std::deque<Node> nodes_;
};

namespace ops {

// Elementwise arithmetic. Operands must have equal shapes or one of them must
// hold a single element (scalar broadcast).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var neg(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var abs(const Var& x);
Var relu(const Var& x);
Var sqrt(const Var& x);
Var square(const Var& x);
/// log(1 + exp(x)), evaluated without overflow.
Var softplus(const Var& x);
/// max(x, floor); gradient is zero where the floor is active.
Var clamp_min(const Var& x, double floor);
Var scale(const Var& x, double factor);
Var add_scalar(const Var& x, double offset);

/// Matrix product of [m x k] by [k x n], or batched [b x m x k] by [b x k x n].
Var matmul(const Var& a, const Var& b);
/// Swaps the last two axes of a rank-2 or rank-3 tensor.
Var transpose(const Var& x);
Var reshape(const Var& x, Shape shape);

Var sum(const Var& x);
Var mean(const Var& x);
/// Sum along one axis, keeping it with size 1.
Var reduce_sum(const Var& x, std::size_t axis);
/// Repeats a size-1 axis `count` times.
Var expand(const Var& x, std::size_t axis, std::size_t count);

Var softmax(const Var& x, std::size_t axis);
Var log_softmax(const Var& x, std::size_t axis);
/// log(sum(exp(x))) along an axis, keeping it with size 1.
Var logsumexp(const Var& x, std::size_t axis);

Var concat(const std::vector<Var>& parts, std::size_t axis);
/// Elements [begin, end) along `axis`.
Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end);

/// Same value, no gradient path.
Var detach(const Var& x);

/// Inverted dropout: zeroes each element with probability `rate` and scales
/// survivors by 1/(1-rate). Identity when `rate` is 0.
Var dropout(const Var& x, double rate, Rng& rng);

}  // namespace ops

inline Var operator+(const Var& a, const Var& b) { return ops::add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return ops::sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return ops::mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return ops::div(a, b); }
inline Var operator-(const Var& x) { return ops::neg(x); }

}  // namespace hmix

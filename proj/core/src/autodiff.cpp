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

#include "hmix/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hmix/error.hpp"
#include "hmix/random.hpp"

namespace hmix {

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw ContractError("use of an unbound Var");
  return tape_->value(id_);
}

namespace {

void check_finite(const Tensor& t, const char* where) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) throw DomainError(fmt::format("{}: non-finite result", where));
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw BoundsError(fmt::format("axis {} out of range for shape {}", axis, shape_str(shape)));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
}

template <class Fwd, class DA, class DB>
Var binary(const char* name, const Var& a, const Var& b, Fwd fwd, DA da, DB db) {
  same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Shape out_shape;
  if (av.shape() == bv.shape()) {
    out_shape = av.shape();
  } else if (bv.size() == 1) {
    out_shape = av.shape();
  } else if (av.size() == 1) {
    out_shape = bv.shape();
  } else {
    throw DimensionError(fmt::format("{}: shapes {} and {} are not compatible", name, shape_str(av.shape()),
                                     shape_str(bv.shape())));
  }
  const bool a_scalar = av.size() == 1 && shape_size(out_shape) != 1;
  const bool b_scalar = bv.size() == 1 && shape_size(out_shape) != 1;
  Tensor out(out_shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = fwd(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
  }
  check_finite(out, name);
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const auto& x = t.value(ia);
    const auto& y = t.value(ib);
    const auto& o = t.value(self);
    auto g = t.grad(self);
    auto gx = t.grad(ia);
    auto gy = t.grad(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double xv = x[a_scalar ? 0 : i];
      const double yv = y[b_scalar ? 0 : i];
      if (!gx.empty()) gx[a_scalar ? 0 : i] += g[i] * da(xv, yv, o[i]);
      if (!gy.empty()) gy[b_scalar ? 0 : i] += g[i] * db(xv, yv, o[i]);
    }
  });
}

template <class Fwd, class D>
Var unary(const char* name, const Var& x, Fwd fwd, D deriv) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  check_finite(out, name);
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    auto gx = t.grad(ix);
    if (gx.empty()) return;
    const auto& in = t.value(ix);
    const auto& o = t.value(self);
    auto g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(in[i], o[i]);
  });
}

}  // namespace

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor& parameter) {
  Node node{parameter.reshaped(parameter.shape()), {}, nullptr, nullptr, false, {}};
  if (parameter.requires_grad()) {
    node.parameter = &parameter;
    node.needs_grad = true;
    node.grad.assign(parameter.size(), 0.0);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool needs = false;
  for (auto id : inputs) {
    if (id >= nodes_.size()) throw ContractError("tape input does not precede its consumer");
    needs = needs || nodes_[id].needs_grad;
  }
  Node node{std::move(value), std::move(inputs), nullptr, nullptr, needs, {}};
  if (needs) {
    node.backward = std::move(backward);
    node.grad.assign(node.value.size(), 0.0);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(const Var& loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss was recorded on another tape");
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  for (auto& node : nodes_) std::fill(node.grad.begin(), node.grad.end(), 0.0);
  if (!nodes_[loss.id()].needs_grad) return;
  nodes_[loss.id()].grad[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.needs_grad) continue;
    if (node.backward) node.backward(*this, id);
    if (node.parameter != nullptr) {
      auto adj = node.parameter->adjoint();
      for (std::size_t i = 0; i < adj.size(); ++i) adj[i] += node.grad[i];
    }
  }
}

namespace ops {

Var add(const Var& a, const Var& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Var div(const Var& a, const Var& b) {
  for (double v : b.value().values()) {
    if (v == 0.0) throw DomainError("div: division by zero");
  }
  return binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double o) { return -o / y; });
}

Var neg(const Var& x) {
  return unary("neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var exp(const Var& x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double o) { return o; });
}

Var log(const Var& x) {
  for (double v : x.value().values()) {
    if (!(v > 0.0)) throw DomainError(fmt::format("log: non-positive argument {}", v));
  }
  return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var abs(const Var& x) {
  // Subgradient 0 at the kink.
  return unary(
      "abs", x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var relu(const Var& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sqrt(const Var& x) {
  for (double v : x.value().values()) {
    if (v < 0.0) throw DomainError(fmt::format("sqrt: negative argument {}", v));
  }
  return unary(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double, double o) { return o > 0.0 ? 0.5 / o : 0.0; });
}

Var square(const Var& x) {
  return unary("square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var softplus(const Var& x) {
  return unary(
      "softplus", x, [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

Var clamp_min(const Var& x, double floor) {
  return unary(
      "clamp_min", x, [floor](double v) { return v > floor ? v : floor; },
      [floor](double v, double) { return v > floor ? 1.0 : 0.0; });
}

Var scale(const Var& x, double factor) {
  return unary("scale", x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Var add_scalar(const Var& x, double offset) {
  return unary("add_scalar", x, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Var matmul(const Var& a, const Var& b) {
  same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool batched = av.rank() == 3 && bv.rank() == 3;
  if (!((av.rank() == 2 && bv.rank() == 2) || batched) || av.shape().back() != bv.shape()[bv.rank() - 2] ||
      (batched && av.dim(0) != bv.dim(0))) {
    throw DimensionError(
        fmt::format("matmul: incompatible shapes {} and {}", shape_str(av.shape()), shape_str(bv.shape())));
  }
  const std::size_t batch = batched ? av.dim(0) : 1;
  const std::size_t m = av.shape()[av.rank() - 2];
  const std::size_t k = av.shape().back();
  const std::size_t n = bv.shape().back();
  Tensor out(batched ? Shape{batch, m, n} : Shape{m, n});
  for (std::size_t q = 0; q < batch; ++q) {
    const double* ap = av.values().data() + q * m * k;
    const double* bp = bv.values().data() + q * k * n;
    double* cp = out.values().data() + q * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = ap[i * k + p];
        for (std::size_t j = 0; j < n; ++j) cp[i * n + j] += aip * bp[p * n + j];
      }
    }
  }
  check_finite(out, "matmul");
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const double* g = t.grad(self).data();
    auto ga = t.grad(ia);
    auto gb = t.grad(ib);
    const auto& A = t.value(ia);
    const auto& B = t.value(ib);
    for (std::size_t q = 0; q < batch; ++q) {
      const double* ap = A.values().data() + q * m * k;
      const double* bp = B.values().data() + q * k * n;
      const double* gq = g + q * m * n;
      if (!ga.empty()) {
        double* gap = ga.data() + q * m * k;
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += gq[i * n + j] * bp[p * n + j];
            gap[i * k + p] += acc;
          }
        }
      }
      if (!gb.empty()) {
        double* gbp = gb.data() + q * k * n;
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = ap[i * k + p];
            for (std::size_t j = 0; j < n; ++j) gbp[p * n + j] += aip * gq[i * n + j];
          }
        }
      }
    }
  });
}

Var transpose(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 && xv.rank() != 3) {
    throw DimensionError("transpose: expected rank 2 or 3, got " + shape_str(xv.shape()));
  }
  const std::size_t batch = xv.rank() == 3 ? xv.dim(0) : 1;
  const std::size_t m = xv.shape()[xv.rank() - 2];
  const std::size_t n = xv.shape().back();
  Shape shape = xv.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  Tensor out(shape);
  for (std::size_t q = 0; q < batch; ++q) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) out[q * m * n + j * m + i] = xv[q * m * n + i * n + j];
    }
  }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    auto gx = t.grad(ix);
    auto g = t.grad(self);
    for (std::size_t q = 0; q < batch; ++q) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) gx[q * m * n + i * n + j] += g[q * m * n + j * m + i];
      }
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    auto gx = t.grad(ix);
    auto g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var sum(const Var& x) {
  const Tensor& xv = x.value();
  double acc = 0.0;
  for (double v : xv.values()) acc += v;
  const std::size_t ix = x.id();
  return x.tape().record(Tensor::scalar(acc), {ix}, [=](Tape& t, std::size_t self) {
    auto gx = t.grad(ix);
    const double g = t.grad(self)[0];
    for (auto& v : gx) v += g;
  });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Var reduce_sum(const Var& x, std::size_t axis) {
  const Tensor& xv = x.value();
  const AxisSplit s = split_axis(xv.shape(), axis);
  Shape shape = xv.shape();
  shape[axis] = 1;
  Tensor out(shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) acc += xv[(o * s.n + j) * s.inner + i];
      out[o * s.inner + i] = acc;
    }
  }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    auto gx = t.grad(ix);
    auto g = t.grad(self);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t j = 0; j < s.n; ++j) {
        for (std::size_t i = 0; i < s.inner; ++i) gx[(o * s.n + j) * s.inner + i] += g[o * s.inner + i];
      }
    }
  });
}

Var expand(const Var& x, std::size_t axis, std::size_t count) {
  const Tensor& xv = x.value();
  const AxisSplit s = split_axis(xv.shape(), axis);
  if (s.n != 1) throw DimensionError(fmt::format("expand: axis {} of {} is not 1", axis, shape_str(xv.shape())));
  Shape shape = xv.shape();
  shape[axis] = count;
  Tensor out(shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < count; ++j) {
      for (std::size_t i = 0; i < s.inner; ++i) out[(o * count + j) * s.inner + i] = xv[o * s.inner + i];
    }
  }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    auto gx = t.grad(ix);
    auto g = t.grad(self);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t j = 0; j < count; ++j) {
        for (std::size_t i = 0; i < s.inner; ++i) gx[o * s.inner + i] += g[(o * count + j) * s.inner + i];
      }
    }
  });
}

Var softmax(const Var& x, std::size_t axis) {
  const Tensor& xv = x.value();
  const AxisSplit s = split_axis(xv.shape(), axis);
  Tensor out(xv.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) hi = std::max(hi, xv[base + j * s.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) {
        const double e = std::exp(xv[base + j * s.inner] - hi);
        out[base + j * s.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] /= z;
    }
  }
  check_finite(out, "softmax");
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    auto gx = t.grad(ix);
    auto g = t.grad(self);
    const auto& y = t.value(self);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.n * s.inner + i;
        double dot = 0.0;
        for (std::size_t j = 0; j < s.n; ++j) dot += g[base + j * s.inner] * y[base + j * s.inner];
        for (std::size_t j = 0; j < s.n; ++j) {
          const std::size_t at = base + j * s.inner;
          gx[at] += y[at] * (g[at] - dot);
        }
      }
    }
  });
}

Var log_softmax(const Var& x, std::size_t axis) {
  const Tensor& xv = x.value();
  const AxisSplit s = split_axis(xv.shape(), axis);
  Tensor out(xv.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) hi = std::max(hi, xv[base + j * s.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) z += std::exp(xv[base + j * s.inner] - hi);
      const double lse = hi + std::log(z);
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] = xv[base + j * s.inner] - lse;
    }
  }
  check_finite(out, "log_softmax");
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    auto gx = t.grad(ix);
    auto g = t.grad(self);
    const auto& y = t.value(self);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.n * s.inner + i;
        double gsum = 0.0;
        for (std::size_t j = 0; j < s.n; ++j) gsum += g[base + j * s.inner];
        for (std::size_t j = 0; j < s.n; ++j) {
          const std::size_t at = base + j * s.inner;
          gx[at] += g[at] - std::exp(y[at]) * gsum;
        }
      }
    }
  });
}

Var logsumexp(const Var& x, std::size_t axis) {
  const Tensor& xv = x.value();
  const AxisSplit s = split_axis(xv.shape(), axis);
  Shape shape = xv.shape();
  shape[axis] = 1;
  Tensor out(shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) hi = std::max(hi, xv[base + j * s.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) z += std::exp(xv[base + j * s.inner] - hi);
      out[o * s.inner + i] = hi + std::log(z);
    }
  }
  check_finite(out, "logsumexp");
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    auto gx = t.grad(ix);
    auto g = t.grad(self);
    const auto& in = t.value(ix);
    const auto& y = t.value(self);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.n * s.inner + i;
        const double lse = y[o * s.inner + i];
        const double go = g[o * s.inner + i];
        for (std::size_t j = 0; j < s.n; ++j) {
          const std::size_t at = base + j * s.inner;
          gx[at] += go * std::exp(in[at] - lse);
        }
      }
    }
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no parts");
  const Shape& first = parts.front().shape();
  const AxisSplit s0 = split_axis(first, axis);
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  std::size_t total = 0;
  for (const auto& p : parts) {
    same_tape(parts.front(), p);
    const Shape& sh = p.shape();
    bool ok = sh.size() == first.size();
    for (std::size_t d = 0; ok && d < sh.size(); ++d) ok = d == axis || sh[d] == first[d];
    if (!ok) {
      throw DimensionError(
          fmt::format("concat: part {} does not match {} off axis {}", shape_str(sh), shape_str(first), axis));
    }
    widths.push_back(sh[axis]);
    ids.push_back(p.id());
    total += sh[axis];
  }
  Shape shape = first;
  shape[axis] = total;
  Tensor out(shape);
  std::size_t offset = 0;
  for (std::size_t q = 0; q < parts.size(); ++q) {
    const Tensor& pv = parts[q].value();
    const std::size_t w = widths[q];
    for (std::size_t o = 0; o < s0.outer; ++o) {
      for (std::size_t j = 0; j < w; ++j) {
        for (std::size_t i = 0; i < s0.inner; ++i) {
          out[(o * total + offset + j) * s0.inner + i] = pv[(o * w + j) * s0.inner + i];
        }
      }
    }
    offset += w;
  }
  const AxisSplit s = s0;
  return parts.front().tape().record(std::move(out), ids, [=](Tape& t, std::size_t self) {
    auto g = t.grad(self);
    std::size_t off = 0;
    for (std::size_t q = 0; q < ids.size(); ++q) {
      const std::size_t w = widths[q];
      auto gp = t.grad(ids[q]);
      if (!gp.empty()) {
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t j = 0; j < w; ++j) {
            for (std::size_t i = 0; i < s.inner; ++i) {
              gp[(o * w + j) * s.inner + i] += g[(o * total + off + j) * s.inner + i];
            }
          }
        }
      }
      off += w;
    }
  });
}

Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  const AxisSplit s = split_axis(xv.shape(), axis);
  if (begin >= end || end > s.n) {
    throw BoundsError(fmt::format("slice: range [{}, {}) invalid for axis {} of {}", begin, end, axis,
                                  shape_str(xv.shape())));
  }
  const std::size_t w = end - begin;
  Shape shape = xv.shape();
  shape[axis] = w;
  Tensor out(shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        out[(o * w + j) * s.inner + i] = xv[(o * s.n + begin + j) * s.inner + i];
      }
    }
  }
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    auto gx = t.grad(ix);
    auto g = t.grad(self);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t j = 0; j < w; ++j) {
        for (std::size_t i = 0; i < s.inner; ++i) {
          gx[(o * s.n + begin + j) * s.inner + i] += g[(o * w + j) * s.inner + i];
        }
      }
    }
  });
}

Var detach(const Var& x) { return x.tape().constant(x.value().reshaped(x.shape())); }

Var dropout(const Var& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError(fmt::format("dropout: rate {} outside [0, 1)", rate));
  if (rate == 0.0) return x;
  Tensor mask(x.shape());
  const double keep = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() >= rate ? keep : 0.0;
  return mul(x, x.tape().constant(std::move(mask)));
}

}  // namespace ops
}  // namespace hmix

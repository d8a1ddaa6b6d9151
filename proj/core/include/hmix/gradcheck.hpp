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

#include <functional>
#include <vector>

#include "hmix/autodiff.hpp"

namespace hmix {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  bool passed = false;
  std::vector<Tensor> analytic;
  std::vector<Tensor> numeric;
};

/// Scalar function of several tensor inputs, built on the supplied tape.
using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares reverse-mode gradients of `f` at `point` with central differences.
///
/// Relative error per coordinate is |a - n| / max(|a|, |n|, denom_floor), so
/// gradients far below `denom_floor` are judged on absolute error. Passes iff
/// the maximum relative error is below `tol`.
GradCheckReport finite_diff_check(const ScalarFn& f, std::vector<Tensor> point, double h = 1e-5,
                                  double tol = 1e-4, double denom_floor = 1e-6);

}  // namespace hmix

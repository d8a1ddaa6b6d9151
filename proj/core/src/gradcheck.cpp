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

#include "hmix/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hmix/error.hpp"

namespace hmix {

namespace {

double evaluate(const ScalarFn& f, std::vector<Tensor>& point) {
  Tape tape;
  std::vector<Var> inputs;
  inputs.reserve(point.size());
  for (auto& p : point) inputs.push_back(tape.constant(p));
  return f(tape, inputs).item();
}

}  // namespace

GradCheckReport finite_diff_check(const ScalarFn& f, std::vector<Tensor> point, double h, double tol,
                                  double denom_floor) {
  GradCheckReport report;
  {
    std::vector<Tensor> params = point;
    Tape tape;
    std::vector<Var> inputs;
    for (auto& p : params) {
      p.set_requires_grad(true);
      inputs.push_back(tape.leaf(p));
    }
    Var out = f(tape, inputs);
    tape.backward(out);
    for (auto& p : params) {
      Tensor g(p.shape());
      std::copy(p.adjoint().begin(), p.adjoint().end(), g.values().begin());
      report.analytic.push_back(std::move(g));
    }
  }

  for (std::size_t q = 0; q < point.size(); ++q) {
    Tensor numeric(point[q].shape());
    for (std::size_t i = 0; i < point[q].size(); ++i) {
      const double x0 = point[q][i];
      point[q][i] = x0 + h;
      const double up = evaluate(f, point);
      point[q][i] = x0 - h;
      const double down = evaluate(f, point);
      point[q][i] = x0;
      numeric[i] = (up - down) / (2.0 * h);

      const double a = report.analytic[q][i];
      const double n = numeric[i];
      const double abs_err = std::abs(a - n);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(n), denom_floor});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel_err > report.max_rel_error) {
        report.max_rel_error = rel_err;
        report.worst_input = q;
        report.worst_index = i;
      }
    }
    report.numeric.push_back(std::move(numeric));
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace hmix

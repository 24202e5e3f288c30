// Copyright 2026 The pdac Authors.
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

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pdac/numerics/tape.hpp"

namespace pdac::numerics {

struct ParameterCheck {
  std::string name;
  double max_rel_error = 0;
  std::size_t worst_index = 0;
  std::size_t flagged = 0;
};

struct GradientReport {
  std::vector<ParameterCheck> parameters;
  double tolerance = 0;

  bool passed() const {
    return std::all_of(parameters.begin(), parameters.end(), [](const auto& p) { return p.flagged == 0; });
  }
  double max_rel_error() const {
    double e = 0;
    for (const auto& p : parameters) e = std::max(e, p.max_rel_error);
    return e;
  }
};

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Entries where both gradients are below this are compared absolutely;
  // relative error is meaningless around zero.
  double abs_floor = 1e-6;
  // Multiplies analytic gradients before comparison. Only used as a
  // negative control.
  double analytic_scale = 1.0;
};

/// Compares analytic gradients with central finite differences.
/// `loss` must rebuild the computation on the given tape from the current
/// parameter values and return a scalar; it is called 2N + 1 times.
template <typename Real>
GradientReport check_gradients(const std::function<Var<Real>(Tape<Real>&)>& loss,
                               std::vector<Parameter<Real>*> params, GradcheckOptions opts = {}) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<Real> tape;
    tape.backward(loss(tape));
  }
  auto evaluate = [&] {
    Tape<Real> tape;
    return static_cast<double>(loss(tape).value().item());
  };

  GradientReport report;
  report.tolerance = opts.tolerance;
  for (auto* p : params) {
    ParameterCheck check{p->name};
    auto values = p->value.data();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const Real saved = values[k];
      values[k] = saved + static_cast<Real>(opts.step);
      const double up = evaluate();
      values[k] = saved - static_cast<Real>(opts.step);
      const double down = evaluate();
      values[k] = saved;
      const double numeric = (up - down) / (2 * opts.step);
      const double analytic = static_cast<double>(p->grad[k]) * opts.analytic_scale;
      const double denom = std::max({std::abs(numeric), std::abs(analytic), opts.abs_floor});
      const double err = std::abs(numeric - analytic) / denom;
      if (err > check.max_rel_error) {
        check.max_rel_error = err;
        check.worst_index = k;
      }
      if (err > opts.tolerance) ++check.flagged;
    }
    report.parameters.push_back(std::move(check));
  }
  return report;
}

}  // namespace pdac::numerics

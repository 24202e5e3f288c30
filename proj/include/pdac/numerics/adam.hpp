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

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pdac/numerics/tape.hpp"

namespace pdac::numerics {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are created lazily to match
/// the parameter list handed to the first step().
template <typename Real>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {
    if (!(config.beta1 > 0 && config.beta1 < 1) || !(config.beta2 > 0 && config.beta2 < 1))
      throw std::invalid_argument("Adam betas must lie in (0, 1)");
    if (!(config.epsilon > 0)) throw std::invalid_argument("Adam epsilon must be positive");
    if (config.lr < 0) throw std::invalid_argument("Adam learning rate must be non-negative");
  }

  void step(std::vector<Parameter<Real>>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.value.shape());
        v_.emplace_back(p.value.shape());
      }
    }
    if (m_.size() != params.size()) throw std::logic_error("Adam: parameter list changed between steps");
    ++step_count_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double corr1 = 1 - std::pow(b1, static_cast<double>(step_count_));
    const double corr2 = 1 - std::pow(b2, static_cast<double>(step_count_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto value = params[i].value.data();
      auto grad = params[i].grad.data();
      auto m = m_[i].data();
      auto v = v_[i].data();
      for (std::size_t k = 0; k < value.size(); ++k) {
        const double g = grad[k];
        m[k] = static_cast<Real>(b1 * m[k] + (1 - b1) * g);
        v[k] = static_cast<Real>(b2 * v[k] + (1 - b2) * g * g);
        const double m_hat = m[k] / corr1;
        const double v_hat = v[k] / corr2;
        value[k] -= static_cast<Real>(config_.lr * m_hat / (std::sqrt(v_hat) + config_.epsilon));
      }
    }
  }

  std::size_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::size_t step_count_ = 0;
  std::vector<Tensor<Real>> m_;
  std::vector<Tensor<Real>> v_;
};

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename Real>
double clip_grad_norm(std::vector<Parameter<Real>>& params, double max_norm) {
  double sq = 0;
  for (const auto& p : params)
    for (auto g : p.grad.data()) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const Real factor = static_cast<Real>(max_norm / norm);
    for (auto& p : params)
      for (auto& g : p.grad.data()) g *= factor;
  }
  return norm;
}

template <typename Real>
void zero_grads(std::vector<Parameter<Real>>& params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace pdac::numerics

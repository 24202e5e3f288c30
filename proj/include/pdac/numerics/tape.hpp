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

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pdac/numerics/tensor.hpp"

namespace pdac::numerics {

/// A learnable tensor together with its accumulated gradient.
template <typename Real>
struct Parameter {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;

  Parameter(std::string n, Tensor<Real> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(Real(0)); }
};

template <typename Real>
class Tape;

/// Handle to a node recorded on a Tape.
template <typename Real>
struct Var {
  Tape<Real>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<Real>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode recording of a computation. Nodes are appended in evaluation
/// order, so a reverse sweep over the node list is a valid topological order.
template <typename Real>
class Tape {
 public:
  /// Called during the reverse sweep with the node's own gradient; it
  /// pushes contributions into parents through accumulate().
  using BackwardFn = std::function<void(Tape&, const Tensor<Real>& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Real> constant(Tensor<Real> value) {
    check_finite(value, "constant");
    nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
    return {this, nodes_.size() - 1};
  }

  /// Leaf for a parameter. Repeated calls with the same parameter return the
  /// same node so that every use accumulates into one gradient.
  Var<Real> param(Parameter<Real>& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
    nodes_.push_back(Node{p.value, {}, true, {}, &p});
    param_nodes_.emplace(&p, nodes_.size() - 1);
    return {this, nodes_.size() - 1};
  }

  Var<Real> record(Tensor<Real> value, std::initializer_list<Var<Real>> parents, BackwardFn fn,
                   const char* op) {
    check_finite(value, op);
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id].requires_grad;
    nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : BackwardFn{}, nullptr});
    return {this, nodes_.size() - 1};
  }

  Var<Real> record(Tensor<Real> value, const std::vector<Var<Real>>& parents, BackwardFn fn,
                   const char* op) {
    check_finite(value, op);
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id].requires_grad;
    nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : BackwardFn{}, nullptr});
    return {this, nodes_.size() - 1};
  }

  const Tensor<Real>& value(Var<Real> v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var<Real> v) const { return nodes_.at(v.id).requires_grad; }

  /// Gradient buffer of a parent node, allocated on first use. Returns
  /// nullptr for nodes that do not lead to any parameter.
  Tensor<Real>* accumulate(Var<Real> v) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad = Tensor<Real>(n.value.shape());
    return &n.grad;
  }

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, adding the
  /// results into Parameter::grad.
  void backward(Var<Real> loss) {
    if (value(loss).size() != 1) {
      throw ShapeError("backward needs a scalar loss, got " + shape_string(value(loss).shape()));
    }
    if (!nodes_[loss.id].requires_grad) return;
    nodes_[loss.id].grad = Tensor<Real>(value(loss).shape(), Real(1));
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) {
        n.backward(*this, n.grad);
      } else if (n.param) {
        auto g = n.param->grad.data();
        auto src = n.grad.data();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += src[k];
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<Real> value;
    Tensor<Real> grad;
    bool requires_grad;
    BackwardFn backward;
    Parameter<Real>* param;
  };

  static void check_finite(const Tensor<Real>& t, const char* op) {
    if (!t.all_finite()) throw NumericError(std::string(op) + ": non-finite value produced");
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<Real>*, std::size_t> param_nodes_;
};

}  // namespace pdac::numerics

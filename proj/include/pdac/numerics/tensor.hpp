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
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdac::numerics {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an op produces a NaN or infinity.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

/// Dense row-major tensor. Most ops treat it as a matrix; rank-1 data is
/// stored as a 1 x n row.
template <typename Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;

  Tensor(std::size_t rows, std::size_t cols, Real fill = Real(0))
      : shape_{rows, cols}, data_(rows * cols, fill) {
    check_extents();
  }

  explicit Tensor(Shape shape, Real fill = Real(0))
      : shape_(std::move(shape)), data_(element_count(shape_), fill) {
    check_extents();
  }

  Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != element_count(shape_)) {
      throw ShapeError("tensor data of size " + std::to_string(data_.size()) +
                       " does not fill shape " + shape_string(shape_));
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<Real> values) {
    return Tensor({rows, cols}, std::vector<Real>(values));
  }

  static Tensor row(std::span<const Real> values) {
    return Tensor({1, values.size()}, std::vector<Real>(values.begin(), values.end()));
  }

  static Tensor scalar(Real value) { return Tensor({1, 1}, std::vector<Real>{value}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const {
    require_matrix();
    return shape_[0];
  }
  std::size_t cols() const {
    require_matrix();
    return shape_[1];
  }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  std::vector<Real>& storage() { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  std::span<Real> row_span(std::size_t r) { return {data_.data() + r * shape_[1], shape_[1]}; }
  std::span<const Real> row_span(std::size_t r) const {
    return {data_.data() + r * shape_[1], shape_[1]};
  }

  Real item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
  }

  void fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, std::vector<Other>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

  void check_extents() const {
    if (shape_.empty()) throw ShapeError("tensor rank must be positive");
    for (auto e : shape_) {
      if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape_));
    }
  }

  void require_matrix() const {
    if (shape_.size() != 2) throw ShapeError("expected a matrix, got " + shape_string(shape_));
  }

  Shape shape_;
  std::vector<Real> data_;
};

}  // namespace pdac::numerics

// Copyright 2026 The fedsnn Authors
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

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedsnn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// Dense row-major n-dimensional array. Storage is a contiguous Eigen column
/// vector so element-wise work can use Eigen array expressions directly.
template <typename Scalar>
class BasicTensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)), data_(Vector::Zero(shape_size(shape_))) {}

  BasicTensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
      throw std::invalid_argument("tensor shape " + shape_to_string(shape_) + " does not match " +
                                  std::to_string(data_.size()) + " values");
    }
  }

  BasicTensor(Shape shape, std::initializer_list<Scalar> values)
      : BasicTensor(std::move(shape), Eigen::Map<const Vector>(values.begin(), Index(values.size()))) {}

  static BasicTensor constant(Shape shape, Scalar value) {
    const Index n = shape_size(shape);
    return BasicTensor(std::move(shape), Vector::Constant(n, value));
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return Index(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(std::size_t(axis)); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Vector& values() { return data_; }
  const Vector& values() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// Size of one slice along the leading axis.
  Index slice_size() const { return shape_.empty() ? 1 : size() / shape_.front(); }

  BasicTensor reshaped(Shape shape) const { return BasicTensor(std::move(shape), data_); }

  template <typename Other>
  BasicTensor<Other> cast() const {
    if (shape_.empty() && data_.size() == 0) return {};  // default-constructed
    return BasicTensor<Other>(shape_, data_.template cast<Other>());
  }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  Vector data_;
};

using Tensor = BasicTensor<float>;

/// Stack equally-shaped tensors along a new leading axis.
template <typename Scalar>
BasicTensor<Scalar> stack(const std::vector<BasicTensor<Scalar>>& parts) {
  if (parts.empty()) throw std::invalid_argument("stack: no tensors");
  Shape shape = parts.front().shape();
  const Index each = parts.front().size();
  shape.insert(shape.begin(), Index(parts.size()));
  BasicTensor<Scalar> out(shape);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].shape() != parts.front().shape()) {
      throw std::invalid_argument("stack: shape " + shape_to_string(parts[i].shape()) + " differs from " +
                                  shape_to_string(parts.front().shape()));
    }
    out.values().segment(Index(i) * each, each) = parts[i].values();
  }
  return out;
}

}  // namespace fedsnn

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace cfmimo {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);
/// Row-major strides of `shape`.
std::vector<std::size_t> strides_of(const Shape& shape);

/// Dense row-major tensor of doubles. Invariant: element_count(shape) ==
/// data.size().
class RealTensor {
 public:
  RealTensor() = default;
  explicit RealTensor(Shape shape, double fill = 0.0);
  RealTensor(Shape shape, std::vector<double> data);

  static RealTensor scalar(double value);
  static RealTensor vector(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  /// Value of a single-element tensor.
  double item() const;

  /// Same data, new shape; element counts must agree.
  RealTensor reshaped(Shape shape) const&;
  RealTensor reshaped(Shape shape) &&;

  bool all_finite() const;

  friend bool operator==(const RealTensor&, const RealTensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace cfmimo

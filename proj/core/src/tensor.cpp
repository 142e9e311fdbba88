// SPDX-License-Identifier: Apache-2.0
#include "cfmimo/tensor.hpp"

#include <cmath>
#include <sstream>

#include "cfmimo/error.hpp"

namespace cfmimo {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

RealTensor::RealTensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

RealTensor::RealTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + to_string(shape_) + " holds " +
                     std::to_string(element_count(shape_)) +
                     " elements but data has " + std::to_string(data_.size()));
  }
}

RealTensor RealTensor::scalar(double value) { return RealTensor({1}, {value}); }

RealTensor RealTensor::vector(std::initializer_list<double> values) {
  return RealTensor({values.size()}, std::vector<double>(values));
}

double RealTensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(shape_));
  }
  return data_[0];
}

RealTensor RealTensor::reshaped(Shape shape) const& {
  return RealTensor(std::move(shape), data_);
}

RealTensor RealTensor::reshaped(Shape shape) && {
  return RealTensor(std::move(shape), std::move(data_));
}

bool RealTensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace cfmimo

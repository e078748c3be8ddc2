#include "coda/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace coda {

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {
  if (std::any_of(shape_.begin(), shape_.end(), [](auto d) { return d == 0; })) {
    throw ShapeError("tensor dimensions must be positive, got " + to_string(shape_));
  }
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (std::any_of(shape_.begin(), shape_.end(), [](auto d) { return d == 0; })) {
    throw ShapeError("tensor dimensions must be positive, got " + to_string(shape_));
  }
  if (element_count(shape_) != values_.size()) {
    throw ShapeError("shape " + to_string(shape_) + " needs " +
                     std::to_string(element_count(shape_)) + " values, got " +
                     std::to_string(values_.size()));
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 1) return 1;
  if (shape_.size() != 2) {
    throw ShapeError("expected a rank-2 tensor, got " + to_string(shape_));
  }
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 1) return shape_[0];
  if (shape_.size() != 2) {
    throw ShapeError("expected a rank-2 tensor, got " + to_string(shape_));
  }
  return shape_[1];
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " + to_string(shape_));
  }
  return values_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

}  // namespace coda

#include "docrex/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "docrex/errors.hpp"

namespace docrex::diffmath {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("tensor: " + std::to_string(data_.size()) + " values do not fill shape " +
                     shape_string(shape_));
  }
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item: tensor of shape " + shape_string(shape_) + " is not a scalar");
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool Tensor::all_zero() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
}

}  // namespace docrex::diffmath

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace docrex::diffmath {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. Most of the library works with rank-2
// tensors; vectors are represented as 1 x n rows.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
  }
  static Tensor row(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({1, n}, std::move(values));
  }
  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 accessors. rows()/cols() treat a rank-1 tensor as a single row.
  std::size_t rows() const { return shape_.size() < 2 ? 1 : shape_[0]; }
  std::size_t cols() const {
    if (shape_.empty()) return 1;
    return shape_.size() == 1 ? shape_[0] : data_.size() / shape_[0];
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<const double> row_span(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }
  std::span<double> row_span(std::size_t r) {
    return std::span<double>(data_).subspan(r * cols(), cols());
  }
  double item() const;

  void fill(double v);
  bool all_finite() const;
  bool all_zero() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace docrex::diffmath

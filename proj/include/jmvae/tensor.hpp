#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace jmvae {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Operand shapes do not conform. The message names the op and both shapes.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs);
  ShapeError(const std::string& op, const std::string& detail);
};

/// Input lies outside an op's mathematical domain (log of a non-positive
/// value, a non-binary Bernoulli observation, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense row-major array. Rank-0 and rank-1 tensors are viewed as a single
// row when an op needs a matrix.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != element_count(shape_)) {
      throw ShapeError("tensor", "shape " + to_string(shape_) + " holds " +
                                     std::to_string(element_count(shape_)) + " values, got " +
                                     std::to_string(values_.size()));
    }
  }

  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<T> values) {
    return Tensor(Shape{rows, cols}, std::vector<T>(values));
  }

  static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(Shape{rows, cols}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::size_t rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const noexcept {
    if (shape_.empty()) return 1;
    return shape_.size() == 2 ? shape_[1] : element_count(shape_);
  }

  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }
  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  T& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  T item() const {
    if (values_.size() != 1) throw ShapeError("item", "expected one value, shape is " + to_string(shape_));
    return values_.front();
  }

  Eigen::Map<RowMatrix<T>> matrix() {
    return {values_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
  }
  Eigen::Map<const RowMatrix<T>> matrix() const {
    return {values_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
  }
  Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> array() {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }
  Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> array() const {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }

  Tensor row(std::size_t r) const {
    const std::size_t c = cols();
    return Tensor(Shape{1, c}, std::vector<T>(values_.begin() + r * c, values_.begin() + (r + 1) * c));
  }

  void fill(T value) { std::fill(values_.begin(), values_.end(), value); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(values_.size());
    std::transform(values_.begin(), values_.end(), out.begin(), [](T v) { return static_cast<U>(v); });
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<T> values_;
};

// Row-wise gather; used to assemble minibatches.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& source, std::span<const std::size_t> rows) {
  const std::size_t c = source.cols();
  Tensor<T> out(Shape{rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(source.data() + rows[i] * c, c, out.data() + i * c);
  }
  return out;
}

/// `rows` copies of the first row of `row`.
template <typename T>
Tensor<T> repeat_rows(const Tensor<T>& row, std::size_t rows) {
  Tensor<T> out(Shape{rows, row.cols()});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(row.data(), row.cols(), out.data() + r * row.cols());
  return out;
}

}  // namespace jmvae

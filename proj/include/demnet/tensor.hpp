#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "demnet/rng.hpp"

namespace demnet {

using Shape = std::vector<std::size_t>;

/// Product of the dimensions; throws ShapeError if `shape` is empty or any
/// dimension is zero.
std::size_t checked_volume(const Shape& shape);

std::string shape_to_string(const Shape& shape);

/// Dense row-major array. `float` is the storage type for data and
/// parameters; `double` is used for finite-difference gradient checks.
///
/// A default-constructed tensor is empty (rank 0, no data) and only serves as
/// a placeholder; every factory enforces non-empty shapes with positive dims.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  static BasicTensor filled(Shape shape, T value);
  static BasicTensor zeros(Shape shape) { return filled(std::move(shape), T(0)); }
  static BasicTensor from_data(Shape shape, std::vector<T> data);
  /// Each element lo + (hi - lo) * u with u from `rng` in storage order.
  static BasicTensor uniform(Shape shape, RngState& rng, double lo, double hi);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }
  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::initializer_list<std::size_t> index);
  const T& at(std::initializer_list<std::size_t> index) const;

  /// In-place reshape; the element count must not change.
  void reshape(Shape shape);
  BasicTensor reshaped(Shape shape) const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>::from_data(shape_, std::move(out));
  }

  void fill(T value);

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {}

  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// c[m, n] += a[m, k] * b[k, n] on raw row-major buffers. Every output is
/// accumulated over the inner index in ascending order.
template <typename T>
void gemm_accumulate(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
                     std::size_t n);

/// Row-major transpose of an [rows, cols] buffer into [cols, rows].
template <typename T>
void transpose_into(const T* src, T* dst, std::size_t rows, std::size_t cols);

/// Standard matrix product of [m, k] and [k, n].
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a);

/// Identity matrix of order n.
template <typename T>
BasicTensor<T> identity(std::size_t n);

/// Bitwise equality of shape and data, treating NaN payloads by bits.
template <typename T>
bool bitwise_equal(const BasicTensor<T>& a, const BasicTensor<T>& b);

}  // namespace demnet

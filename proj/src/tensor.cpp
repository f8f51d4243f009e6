#include "demnet/tensor.hpp"

#include <cstring>
#include <sstream>

#include "demnet/errors.hpp"

namespace demnet {

std::size_t checked_volume(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  std::size_t volume = 1;
  for (std::size_t axis = 0; axis < shape.size(); ++axis) {
    if (shape[axis] == 0) {
      throw ShapeError("dimension " + std::to_string(axis) + " of shape " +
                       shape_to_string(shape) + " must be >= 1");
    }
    volume *= shape[axis];
  }
  return volume;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
BasicTensor<T> BasicTensor<T>::filled(Shape shape, T value) {
  const std::size_t n = checked_volume(shape);
  return BasicTensor(std::move(shape), std::vector<T>(n, value));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_data(Shape shape, std::vector<T> data) {
  const std::size_t n = checked_volume(shape);
  if (data.size() != n) {
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_to_string(shape) + " (" +
                     std::to_string(n) + " elements)");
  }
  return BasicTensor(std::move(shape), std::move(data));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::uniform(Shape shape, RngState& rng, double lo, double hi) {
  const std::size_t n = checked_volume(shape);
  std::vector<T> data(n);
  for (auto& v : data) v = static_cast<T>(lo + (hi - lo) * rng.uniform());
  return BasicTensor(std::move(shape), std::move(data));
}

template <typename T>
std::size_t BasicTensor<T>::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) +
                     " does not match tensor rank " + std::to_string(shape_.size()));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw ShapeError("index out of range on axis " + std::to_string(axis));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

template <typename T>
T& BasicTensor<T>::at(std::initializer_list<std::size_t> index) {
  return data_[offset(index)];
}

template <typename T>
const T& BasicTensor<T>::at(std::initializer_list<std::size_t> index) const {
  return data_[offset(index)];
}

template <typename T>
void BasicTensor<T>::reshape(Shape shape) {
  const std::size_t n = checked_volume(shape);
  if (n != data_.size()) {
    throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " +
                     shape_to_string(shape));
  }
  shape_ = std::move(shape);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  BasicTensor copy = *this;
  copy.reshape(std::move(shape));
  return copy;
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  for (auto& v : data_) v = value;
}

template <typename T>
void gemm_accumulate(const T* a, const T* b, T* c, std::size_t m, std::size_t k,
                     std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void transpose_into(const T* src, T* dst, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul expects rank-2 operands, got " + shape_to_string(a.shape()) +
                     " and " + shape_to_string(b.shape()));
  }
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul inner dimensions differ: " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  auto out = BasicTensor<T>::zeros({a.dim(0), b.dim(1)});
  gemm_accumulate(a.raw(), b.raw(), out.raw(), a.dim(0), a.dim(1), b.dim(1));
  return out;
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
  if (a.rank() != 2) throw ShapeError("transpose expects a rank-2 tensor");
  auto out = BasicTensor<T>::zeros({a.dim(1), a.dim(0)});
  transpose_into(a.raw(), out.raw(), a.dim(0), a.dim(1));
  return out;
}

template <typename T>
BasicTensor<T> identity(std::size_t n) {
  auto out = BasicTensor<T>::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) out[i * n + i] = T(1);
  return out;
}

template <typename T>
bool bitwise_equal(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  return a.size() == 0 || std::memcmp(a.raw(), b.raw(), a.size() * sizeof(T)) == 0;
}

#define DEMNET_INSTANTIATE(T)                                                              \
  template class BasicTensor<T>;                                                           \
  template void gemm_accumulate<T>(const T*, const T*, T*, std::size_t, std::size_t,      \
                                   std::size_t);                                           \
  template void transpose_into<T>(const T*, T*, std::size_t, std::size_t);                 \
  template BasicTensor<T> matmul<T>(const BasicTensor<T>&, const BasicTensor<T>&);         \
  template BasicTensor<T> transpose<T>(const BasicTensor<T>&);                             \
  template BasicTensor<T> identity<T>(std::size_t);                                        \
  template bool bitwise_equal<T>(const BasicTensor<T>&, const BasicTensor<T>&);

DEMNET_INSTANTIATE(float)
DEMNET_INSTANTIATE(double)
#undef DEMNET_INSTANTIATE

}  // namespace demnet

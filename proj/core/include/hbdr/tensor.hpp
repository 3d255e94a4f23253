#ifndef HBDR_TENSOR_HPP
#define HBDR_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "hbdr/rng.hpp"

namespace hbdr {

// Dense n-dimensional array, rank 1..4, row-major, contiguous.
// Value-semantic: operations return fresh tensors; nothing shares
// buffers, so tensors can be handed between threads freely.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(element_count(shape_), T{0});
  }

  Tensor(std::initializer_list<std::size_t> shape)
      : Tensor(std::vector<std::size_t>(shape)) {}

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  T& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  const T& at(std::size_t i, std::size_t j, std::size_t k,
              std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  void fill(T value) { data_.assign(data_.size(), value); }

  // Same buffer reinterpreted under a new shape of equal element count.
  Tensor reshaped(std::vector<std::size_t> new_shape) const {
    validate_shape(new_shape);
    if (element_count(new_shape) != size())
      throw std::invalid_argument("reshape: element count mismatch");
    Tensor out;
    out.shape_ = std::move(new_shape);
    out.data_ = data_;
    return out;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  static void validate_shape(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape is empty");
    if (shape.size() > 4)
      throw std::invalid_argument("tensor rank > 4 not supported");
    for (std::size_t d : shape)
      if (d == 0) throw std::invalid_argument("tensor dimension is zero");
  }

  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

template <typename T>
Tensor<T> zeros(std::vector<std::size_t> shape) {
  return Tensor<T>(std::move(shape));
}

// I.i.d. normal draws. stddev == 0 degenerates to a constant fill and
// does not touch the generator.
template <typename T>
Tensor<T> rand_normal(std::vector<std::size_t> shape, double mean,
                      double stddev, Rng& rng) {
  if (stddev < 0.0) throw std::invalid_argument("rand_normal: negative std");
  Tensor<T> out(std::move(shape));
  if (stddev == 0.0) {
    out.fill(static_cast<T>(mean));
    return out;
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<T>(rng.normal(mean, stddev));
  return out;
}

// Numerically stable logistic sigmoid, split on the sign of the input
// so exp never overflows.
template <typename T>
T sigmoid(T x) {
  if (x >= T{0}) {
    return T{1} / (T{1} + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
Tensor<T> map_sigmoid(const Tensor<T>& t) {
  Tensor<T> out = t;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(out[i]);
  return out;
}

// Standard rank-2 product. Loop order (i, k, j) keeps the inner loop
// contiguous in both operands; accumulation order is fixed.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw std::invalid_argument("matmul: both tensors must be rank 2");
  if (a.dim(1) != b.dim(0))
    throw std::invalid_argument(
        "matmul: inner dimensions differ (" + std::to_string(a.dim(1)) +
        " vs " + std::to_string(b.dim(0)) + ")");
  const std::size_t rows = a.dim(0), inner = a.dim(1), cols = b.dim(1);
  Tensor<T> out({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    T* out_row = out.data() + i * cols;
    for (std::size_t k = 0; k < inner; ++k) {
      const T aik = a[i * inner + k];
      const T* b_row = b.data() + k * cols;
      for (std::size_t j = 0; j < cols; ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(static_cast<double>(t[i]))) return false;
  return true;
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace hbdr

#endif  // HBDR_TENSOR_HPP

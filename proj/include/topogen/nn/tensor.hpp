#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "topogen/core/error.hpp"

namespace topogen::nn {

// Dense numeric array of rank 1..4, row-major. Image batches are NHWC
// (batch, height, width, channels); dense activations are (batch, features).
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    if (shape_.empty() || shape_.size() > 4) throw DataError("Tensor: rank must be 1..4");
    std::size_t n = 1;
    for (int d : shape_) {
      if (d < 1) throw DataError("Tensor: dimensions must be positive");
      n *= static_cast<std::size_t>(d);
    }
    data_.assign(n, T{0});
  }

  Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  // rank-2 access
  T& at(int b, int f) { return data_[static_cast<std::size_t>(b) * shape_[1] + f]; }
  T at(int b, int f) const { return data_[static_cast<std::size_t>(b) * shape_[1] + f]; }

  // rank-4 NHWC access
  T& at(int b, int h, int w, int c) {
    return data_[((static_cast<std::size_t>(b) * shape_[1] + h) * shape_[2] + w) * shape_[3] + c];
  }
  T at(int b, int h, int w, int c) const {
    return data_[((static_cast<std::size_t>(b) * shape_[1] + h) * shape_[2] + w) * shape_[3] + c];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  // reinterpret with identical element count (row-major, so this is free)
  Tensor reshaped(std::vector<int> shape) const {
    Tensor out;
    out.shape_ = std::move(shape);
    if (out.shape_.empty() || out.shape_.size() > 4)
      throw DataError("Tensor::reshaped: rank must be 1..4");
    std::size_t n = 1;
    for (int d : out.shape_) n *= static_cast<std::size_t>(d);
    if (n != data_.size()) throw DataError("Tensor::reshaped: element count mismatch");
    out.data_ = data_;
    return out;
  }

  bool all_finite() const {
    for (T v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  static std::string shape_str(const std::vector<int>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(s[i]);
    }
    return out + ")";
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  template <typename U>
  friend class Tensor;

  std::vector<int> shape_;
  std::vector<T> data_;
};

}  // namespace topogen::nn

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "topogen/core/error.hpp"

namespace topogen {

// Dense 2D field of doubles, row-major with the top row first. Serves as
// both the density field of the optimizer (values in [x_min, 1]) and the
// image currency of the dataset/GAN side (values in [0, 1]).
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 1 || cols < 1) throw ParameterError("Grid: dimensions must be positive");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return v_.size(); }

  double& at(int r, int c) { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return v_[static_cast<std::size_t>(r) * cols_ + c]; }

  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

  const std::vector<double>& values() const { return v_; }
  std::vector<double>& values() { return v_; }

  bool same_shape(const Grid& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double mean() const {
    double s = 0.0;
    for (double x : v_) s += x;
    return s / static_cast<double>(v_.size());
  }

  double min() const {
    double m = v_.empty() ? 0.0 : v_[0];
    for (double x : v_) m = std::min(m, x);
    return m;
  }

  double max() const {
    double m = v_.empty() ? 0.0 : v_[0];
    for (double x : v_) m = std::max(m, x);
    return m;
  }

  bool all_finite() const {
    for (double x : v_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  bool operator==(const Grid& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && v_ == o.v_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> v_;
};

// Mean absolute difference between two same-shaped grids.
inline double mean_abs_diff(const Grid& a, const Grid& b) {
  if (!a.same_shape(b)) throw DataError("mean_abs_diff: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline double max_abs_diff(const Grid& a, const Grid& b) {
  if (!a.same_shape(b)) throw DataError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace topogen

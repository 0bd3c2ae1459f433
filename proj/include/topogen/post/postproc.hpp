#pragma once

#include <cmath>
#include <vector>

#include "topogen/core/grid.hpp"

namespace topogen::post {

struct PostprocConfig {
  double threshold = 0.5;
  int kernel_size = 5;
  double sigma = 1.0;

  void validate() const {
    if (!(threshold > 0.0 && threshold < 1.0))
      throw ParameterError("PostprocConfig: threshold must be in (0, 1)");
    if (kernel_size < 1 || kernel_size % 2 == 0)
      throw ParameterError("PostprocConfig: kernel size must be odd and positive");
    if (!(sigma > 0.0)) throw ParameterError("PostprocConfig: sigma must be > 0");
  }
};

// Hard threshold; values >= t map to 1 (ties count as material).
inline Grid threshold(const Grid& image, double t) {
  if (!image.all_finite()) throw DataError("threshold: non-finite pixels");
  Grid out(image.rows(), image.cols());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = image[i] >= t ? 1.0 : 0.0;
  return out;
}

// Normalized 1D Gaussian taps; sum is 1 up to rounding.
inline std::vector<double> gaussian_kernel_1d(int kernel_size, double sigma) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw ParameterError("gaussian_kernel_1d: kernel size must be odd and positive");
  if (!(sigma > 0.0)) throw ParameterError("gaussian_kernel_1d: sigma must be > 0");
  const int h = kernel_size / 2;
  std::vector<double> w(kernel_size);
  double sum = 0.0;
  for (int i = 0; i < kernel_size; ++i) {
    const double d = i - h;
    w[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return w;
}

// Outer product of the normalized 1D taps; identical to what the separable
// passes apply, so the impulse response reads this kernel back bit-for-bit.
inline Grid gaussian_kernel_2d(int kernel_size, double sigma) {
  const auto w = gaussian_kernel_1d(kernel_size, sigma);
  Grid k(kernel_size, kernel_size);
  for (int r = 0; r < kernel_size; ++r) {
    for (int c = 0; c < kernel_size; ++c) k.at(r, c) = w[r] * w[c];
  }
  return k;
}

namespace detail {

// mirror index without repeating the border sample
inline int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i < n ? i : period - i;
}

}  // namespace detail

// Separable Gaussian blur with reflect padding. The output range stays
// within [min(input), max(input)] since the taps are a convex combination.
inline Grid gaussian_smooth(const Grid& image, int kernel_size, double sigma) {
  const auto w = gaussian_kernel_1d(kernel_size, sigma);
  const int h = kernel_size / 2;
  const int rows = image.rows(), cols = image.cols();

  Grid tmp(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kernel_size; ++k)
        acc += image.at(r, detail::reflect(c + k - h, cols)) * w[k];
      tmp.at(r, c) = acc;
    }
  }
  Grid out(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (int k = 0; k < kernel_size; ++k)
        acc += tmp.at(detail::reflect(r + k - h, rows), c) * w[k];
      out.at(r, c) = acc;
    }
  }
  return out;
}

// Threshold first, then smooth, in that order.
inline Grid postprocess(const Grid& image, const PostprocConfig& config = {}) {
  config.validate();
  return gaussian_smooth(threshold(image, config.threshold), config.kernel_size, config.sigma);
}

}  // namespace topogen::post

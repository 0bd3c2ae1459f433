#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "topogen/nn/spec.hpp"
#include "topogen/nn/tensor.hpp"

namespace topogen::nn::detail {

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatrixRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatrixRM<T>>;

struct ConvGeom {
  int h_in, w_in, c_in, h_out, w_out, c_out, kernel, stride, pad_top, pad_left;
};

inline ConvGeom conv_geometry(const Conv2dSpec& s, const FeatureShape& in) {
  ConvGeom g;
  g.h_in = in[0];
  g.w_in = in[1];
  g.c_in = in[2];
  g.kernel = s.kernel;
  g.stride = s.stride;
  g.c_out = s.filters;
  g.h_out = shape_algebra::conv_out_dim(g.h_in, s.kernel, s.stride, s.padding);
  g.w_out = shape_algebra::conv_out_dim(g.w_in, s.kernel, s.stride, s.padding);
  if (s.padding == Padding::same) {
    const int pad_h = std::max(0, (g.h_out - 1) * g.stride + g.kernel - g.h_in);
    const int pad_w = std::max(0, (g.w_out - 1) * g.stride + g.kernel - g.w_in);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  } else {
    g.pad_top = 0;
    g.pad_left = 0;
  }
  return g;
}

// Gather receptive fields into a (B*Ho*Wo, k*k*Cin) matrix, zeros outside.
template <typename T>
void im2col(const Tensor<T>& x, const ConvGeom& g, MatrixRM<T>& cols) {
  const int batch = x.dim(0);
  cols.setZero(static_cast<long>(batch) * g.h_out * g.w_out,
               static_cast<long>(g.kernel) * g.kernel * g.c_in);
  long row = 0;
  for (int b = 0; b < batch; ++b) {
    for (int oh = 0; oh < g.h_out; ++oh) {
      for (int ow = 0; ow < g.w_out; ++ow, ++row) {
        T* dst = cols.data() + row * cols.cols();
        for (int kh = 0; kh < g.kernel; ++kh) {
          const int ih = oh * g.stride - g.pad_top + kh;
          if (ih < 0 || ih >= g.h_in) continue;
          for (int kw = 0; kw < g.kernel; ++kw) {
            const int iw = ow * g.stride - g.pad_left + kw;
            if (iw < 0 || iw >= g.w_in) continue;
            const T* src = x.data() +
                ((static_cast<std::size_t>(b) * g.h_in + ih) * g.w_in + iw) * g.c_in;
            std::copy(src, src + g.c_in, dst + (kh * g.kernel + kw) * g.c_in);
          }
        }
      }
    }
  }
}

// Scatter-add of column gradients back onto the input layout.
template <typename T>
void col2im(const MatrixRM<T>& cols, const ConvGeom& g, Tensor<T>& dx) {
  const int batch = dx.dim(0);
  long row = 0;
  for (int b = 0; b < batch; ++b) {
    for (int oh = 0; oh < g.h_out; ++oh) {
      for (int ow = 0; ow < g.w_out; ++ow, ++row) {
        const T* src = cols.data() + row * cols.cols();
        for (int kh = 0; kh < g.kernel; ++kh) {
          const int ih = oh * g.stride - g.pad_top + kh;
          if (ih < 0 || ih >= g.h_in) continue;
          for (int kw = 0; kw < g.kernel; ++kw) {
            const int iw = ow * g.stride - g.pad_left + kw;
            if (iw < 0 || iw >= g.w_in) continue;
            T* dst = dx.data() +
                ((static_cast<std::size_t>(b) * g.h_in + ih) * g.w_in + iw) * g.c_in;
            const T* s = src + (kh * g.kernel + kw) * g.c_in;
            for (int c = 0; c < g.c_in; ++c) dst[c] += s[c];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                         const ConvGeom& g) {
  const int batch = x.dim(0);
  MatrixRM<T> cols;
  im2col(x, g, cols);
  CMapRM<T> w(kernel.data(), static_cast<long>(g.kernel) * g.kernel * g.c_in, g.c_out);
  Tensor<T> y({batch, g.h_out, g.w_out, g.c_out});
  MapRM<T> ym(y.data(), cols.rows(), g.c_out);
  ym.noalias() = cols * w;
  ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.data(), g.c_out);
  return y;
}

template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& dy,
                          const ConvGeom& g, Tensor<T>& dkernel, Tensor<T>& dbias) {
  const int batch = x.dim(0);
  const long rows = static_cast<long>(batch) * g.h_out * g.w_out;
  const long kcols = static_cast<long>(g.kernel) * g.kernel * g.c_in;

  MatrixRM<T> cols;
  im2col(x, g, cols);
  CMapRM<T> dym(dy.data(), rows, g.c_out);

  MapRM<T> dwm(dkernel.data(), kcols, g.c_out);
  dwm.noalias() = cols.transpose() * dym;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(dbias.data(), g.c_out) = dym.colwise().sum();

  CMapRM<T> w(kernel.data(), kcols, g.c_out);
  MatrixRM<T> dcols(rows, kcols);
  dcols.noalias() = dym * w.transpose();

  Tensor<T> dx({batch, g.h_in, g.w_in, g.c_in});
  col2im(dcols, g, dx);
  return dx;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const int batch = x.dim(0), fin = x.dim(1), fout = w.dim(1);
  Tensor<T> y({batch, fout});
  CMapRM<T> xm(x.data(), batch, fin);
  CMapRM<T> wm(w.data(), fin, fout);
  MapRM<T> ym(y.data(), batch, fout);
  ym.noalias() = xm * wm;
  ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.data(), fout);
  return y;
}

template <typename T>
Tensor<T> dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                         Tensor<T>& dw, Tensor<T>& db) {
  const int batch = x.dim(0), fin = x.dim(1), fout = w.dim(1);
  CMapRM<T> xm(x.data(), batch, fin);
  CMapRM<T> wm(w.data(), fin, fout);
  CMapRM<T> dym(dy.data(), batch, fout);
  MapRM<T>(dw.data(), fin, fout).noalias() = xm.transpose() * dym;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(db.data(), fout) = dym.colwise().sum();
  Tensor<T> dx({batch, fin});
  MapRM<T>(dx.data(), batch, fin).noalias() = dym * wm.transpose();
  return dx;
}

template <typename T>
Tensor<T> maxpool_forward(const Tensor<T>& x, int window, std::vector<std::int64_t>& argmax) {
  const int batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int ho = h / window, wo = w / window;
  Tensor<T> y({batch, ho, wo, c});
  argmax.assign(y.numel(), 0);
  std::size_t out = 0;
  for (int b = 0; b < batch; ++b) {
    for (int oh = 0; oh < ho; ++oh) {
      for (int ow = 0; ow < wo; ++ow) {
        for (int ch = 0; ch < c; ++ch, ++out) {
          T best{};
          std::int64_t best_idx = -1;
          for (int kh = 0; kh < window; ++kh) {
            for (int kw = 0; kw < window; ++kw) {
              const int ih = oh * window + kh, iw = ow * window + kw;
              const std::int64_t idx =
                  ((static_cast<std::int64_t>(b) * h + ih) * w + iw) * c + ch;
              const T v = x[static_cast<std::size_t>(idx)];
              if (best_idx < 0 || v > best) {
                best = v;
                best_idx = idx;
              }
            }
          }
          y[out] = best;
          argmax[out] = best_idx;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> maxpool_backward(const std::vector<int>& in_shape, const Tensor<T>& dy,
                           const std::vector<std::int64_t>& argmax) {
  Tensor<T> dx(in_shape);
  for (std::size_t i = 0; i < dy.numel(); ++i)
    dx[static_cast<std::size_t>(argmax[i])] += dy[i];
  return dx;
}

template <typename T>
Tensor<T> upsample_forward(const Tensor<T>& x, int factor) {
  const int batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  Tensor<T> y({batch, h * factor, w * factor, c});
  for (int b = 0; b < batch; ++b) {
    for (int oh = 0; oh < h * factor; ++oh) {
      const int ih = oh / factor;
      for (int ow = 0; ow < w * factor; ++ow) {
        const int iw = ow / factor;
        const T* src = x.data() + ((static_cast<std::size_t>(b) * h + ih) * w + iw) * c;
        T* dst = y.data() +
            ((static_cast<std::size_t>(b) * h * factor + oh) * w * factor + ow) * c;
        std::copy(src, src + c, dst);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample_backward(const std::vector<int>& in_shape, const Tensor<T>& dy, int factor) {
  Tensor<T> dx(in_shape);
  const int batch = in_shape[0], h = in_shape[1], w = in_shape[2], c = in_shape[3];
  for (int b = 0; b < batch; ++b) {
    for (int oh = 0; oh < h * factor; ++oh) {
      const int ih = oh / factor;
      for (int ow = 0; ow < w * factor; ++ow) {
        const int iw = ow / factor;
        const T* src = dy.data() +
            ((static_cast<std::size_t>(b) * h * factor + oh) * w * factor + ow) * c;
        T* dst = dx.data() + ((static_cast<std::size_t>(b) * h + ih) * w + iw) * c;
        for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> activation_forward(const Tensor<T>& x, Activation kind, double alpha) {
  Tensor<T> y(x.shape());
  const T a = static_cast<T>(alpha);
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
      break;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T{0} ? x[i] : a * x[i];
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < x.numel(); ++i)
        y[i] = T{1} / (T{1} + std::exp(-x[i]));
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
      break;
    case Activation::none:
      y = x;
      break;
  }
  return y;
}

// dx from dy; x is the cached input, y the cached output.
template <typename T>
Tensor<T> activation_backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy,
                              Activation kind, double alpha) {
  Tensor<T> dx(x.shape());
  const T a = static_cast<T>(alpha);
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < x.numel(); ++i) dx[i] = x[i] > T{0} ? dy[i] : T{0};
      break;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < x.numel(); ++i) dx[i] = x[i] > T{0} ? dy[i] : a * dy[i];
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < x.numel(); ++i) dx[i] = dy[i] * y[i] * (T{1} - y[i]);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < x.numel(); ++i) dx[i] = dy[i] * (T{1} - y[i] * y[i]);
      break;
    case Activation::none:
      dx = dy;
      break;
  }
  return dx;
}

// Batch normalization over all axes but the last (channels). eps and
// momentum follow the common torch defaults.
inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.9;

template <typename T>
struct BnCache {
  Tensor<T> xhat;
  std::vector<T> invstd;
  long per_channel = 0;
};

template <typename T>
Tensor<T> batchnorm_forward_train(const Tensor<T>& x, const Tensor<T>& gamma,
                                  const Tensor<T>& beta, Tensor<T>& running_mean,
                                  Tensor<T>& running_var, BnCache<T>& cache, bool update_stats) {
  const int ch = x.dim(x.rank() - 1);
  const long n = static_cast<long>(x.numel()) / ch;
  std::vector<T> mean(ch, T{0}), var(ch, T{0});
  for (std::size_t i = 0; i < x.numel(); ++i) mean[i % ch] += x[i];
  for (int c = 0; c < ch; ++c) mean[c] /= static_cast<T>(n);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T d = x[i] - mean[i % ch];
    var[i % ch] += d * d;
  }
  for (int c = 0; c < ch; ++c) var[c] /= static_cast<T>(n);  // biased

  cache.xhat = Tensor<T>(x.shape());
  cache.invstd.assign(ch, T{0});
  cache.per_channel = n;
  for (int c = 0; c < ch; ++c)
    cache.invstd[c] = T{1} / std::sqrt(var[c] + static_cast<T>(kBnEps));

  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const int c = static_cast<int>(i % ch);
    cache.xhat[i] = (x[i] - mean[c]) * cache.invstd[c];
    y[i] = gamma[c] * cache.xhat[i] + beta[c];
  }

  if (update_stats) {
    const T m = static_cast<T>(kBnMomentum);
    for (int c = 0; c < ch; ++c) {
      running_mean[c] = m * running_mean[c] + (T{1} - m) * mean[c];
      running_var[c] = m * running_var[c] + (T{1} - m) * var[c];
    }
  }
  return y;
}

template <typename T>
Tensor<T> batchnorm_forward_infer(const Tensor<T>& x, const Tensor<T>& gamma,
                                  const Tensor<T>& beta, const Tensor<T>& running_mean,
                                  const Tensor<T>& running_var) {
  const int ch = x.dim(x.rank() - 1);
  std::vector<T> scale(ch), shift(ch);
  for (int c = 0; c < ch; ++c) {
    scale[c] = gamma[c] / std::sqrt(running_var[c] + static_cast<T>(kBnEps));
    shift[c] = beta[c] - scale[c] * running_mean[c];
  }
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const int c = static_cast<int>(i % ch);
    y[i] = scale[c] * x[i] + shift[c];
  }
  return y;
}

template <typename T>
Tensor<T> batchnorm_backward(const Tensor<T>& gamma, const Tensor<T>& dy, const BnCache<T>& cache,
                             Tensor<T>& dgamma, Tensor<T>& dbeta) {
  const int ch = dy.dim(dy.rank() - 1);
  const T n = static_cast<T>(cache.per_channel);
  std::vector<T> sum_dy(ch, T{0}), sum_dy_xhat(ch, T{0});
  for (std::size_t i = 0; i < dy.numel(); ++i) {
    const int c = static_cast<int>(i % ch);
    sum_dy[c] += dy[i];
    sum_dy_xhat[c] += dy[i] * cache.xhat[i];
  }
  for (int c = 0; c < ch; ++c) {
    dgamma[c] = sum_dy_xhat[c];
    dbeta[c] = sum_dy[c];
  }
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.numel(); ++i) {
    const int c = static_cast<int>(i % ch);
    dx[i] = gamma[c] * cache.invstd[c] / n *
            (n * dy[i] - sum_dy[c] - cache.xhat[i] * sum_dy_xhat[c]);
  }
  return dx;
}

}  // namespace topogen::nn::detail

#pragma once

#include <utility>

#include "topogen/nn/tensor.hpp"

namespace topogen::nn {

// Mean squared error over all elements; gradient is 2 (pred - target) / n.
template <typename T>
std::pair<double, Tensor<T>> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target)) throw DataError("mse_loss: shape mismatch");
  const double n = static_cast<double>(pred.numel());
  double sum = 0.0;
  Tensor<T> grad(pred.shape());
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    sum += d * d;
    grad[i] = static_cast<T>(2.0 * d / n);
  }
  return {sum / n, grad};
}

struct WassersteinLosses {
  double critic_loss;     // mean(fake) - mean(real), minimized by the critic
  double generator_loss;  // -mean(fake), minimized by the generator
};

// Earth-mover surrogate from per-item critic scores.
template <typename T>
WassersteinLosses wasserstein_losses(const Tensor<T>& critic_real, const Tensor<T>& critic_fake) {
  if (critic_real.numel() == 0 || critic_fake.numel() == 0)
    throw DataError("wasserstein_losses: empty batch");
  double real = 0.0, fake = 0.0;
  for (std::size_t i = 0; i < critic_real.numel(); ++i) real += critic_real[i];
  for (std::size_t i = 0; i < critic_fake.numel(); ++i) fake += critic_fake[i];
  real /= static_cast<double>(critic_real.numel());
  fake /= static_cast<double>(critic_fake.numel());
  return {fake - real, -fake};
}

}  // namespace topogen::nn

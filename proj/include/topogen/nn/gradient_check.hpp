#pragma once

#include <functional>

#include "topogen/nn/network.hpp"

namespace topogen::nn {

// Loss over the network output: returns the scalar and its gradient.
template <typename T>
using LossFn = std::function<std::pair<double, Tensor<T>>(const Tensor<T>&)>;

// Compares backpropagated weight gradients against central differences,
// parameter by parameter, in train-mode math with running-stat updates
// suppressed. Returns the worst relative error. Intended for small networks
// in double precision; maxpool inputs must stay away from tie points (the
// subgradient makes finite differences meaningless there).
inline double gradient_check(Sequential<double>& net, const Tensor<double>& input,
                             const LossFn<double>& loss, double eps = 1e-5) {
  ForwardCache<double> cache;
  const Tensor<double> pred = net.forward(input, Mode::train, &cache, /*update_stats=*/false);
  auto [value, dpred] = loss(pred);
  GradientSet<double> grads = net.zero_grads();
  net.backward(dpred, cache, grads);

  double worst = 0.0;
  for (std::size_t li = 0; li < net.layer_count(); ++li) {
    auto& layer = net.layer(li);
    for (std::size_t ti = 0; ti < layer.trainable.size(); ++ti) {
      Tensor<double>& w = layer.trainable[ti];
      for (std::size_t i = 0; i < w.numel(); ++i) {
        const double keep = w[i];
        w[i] = keep + eps;
        ForwardCache<double> scratch;
        const double up =
            loss(net.forward(input, Mode::train, &scratch, /*update_stats=*/false)).first;
        w[i] = keep - eps;
        const double down =
            loss(net.forward(input, Mode::train, &scratch, /*update_stats=*/false)).first;
        w[i] = keep;
        const double numeric = (up - down) / (2.0 * eps);
        const double analytic = grads[li][ti][i];
        // the floor keeps finite-difference cancellation noise on
        // exactly-zero gradients from registering as relative error
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        worst = std::max(worst, std::abs(numeric - analytic) / denom);
      }
    }
  }
  return worst;
}

}  // namespace topogen::nn

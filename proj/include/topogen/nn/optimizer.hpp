#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "topogen/nn/network.hpp"
#include "topogen/nn/tensor.hpp"

namespace topogen::nn {

enum class OptimizerKind { adam, rmsprop };

// Per-parameter moment accumulators over a fixed list of weight tensors.
// Adam uses bias-corrected first/second moments (beta1 0.9, beta2 0.999);
// RMSProp keeps a decaying mean square (rho 0.9). eps 1e-8 for both.
template <typename T>
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {
    if (!(learning_rate > 0.0)) throw ParameterError("Optimizer: learning rate must be > 0");
  }

  void attach(const std::vector<Tensor<T>*>& params) {
    params_ = params;
    m_.clear();
    v_.clear();
    for (const Tensor<T>* p : params_) {
      if (kind_ == OptimizerKind::adam) m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
    step_count_ = 0;
  }

  long step_count() const { return step_count_; }
  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return lr_; }

  // One update over all attached tensors; grads must mirror their shapes.
  void step(const std::vector<const Tensor<T>*>& grads) {
    if (grads.size() != params_.size()) throw UsageError("Optimizer: gradient list mismatch");
    for (std::size_t k = 0; k < grads.size(); ++k) {
      if (!grads[k]->same_shape(*params_[k]))
        throw UsageError("Optimizer: gradient shape mismatch at tensor " + std::to_string(k));
      if (!grads[k]->all_finite())
        throw TrainingError("Optimizer: non-finite gradient at tensor " + std::to_string(k) +
                            " (step " + std::to_string(step_count_ + 1) + ")");
    }
    ++step_count_;
    const T lr = static_cast<T>(lr_);
    const T eps = static_cast<T>(kEps);
    if (kind_ == OptimizerKind::adam) {
      const T b1 = static_cast<T>(kBeta1), b2 = static_cast<T>(kBeta2);
      const T c1 = T{1} - static_cast<T>(std::pow(kBeta1, step_count_));
      const T c2 = T{1} - static_cast<T>(std::pow(kBeta2, step_count_));
      for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor<T>& w = *params_[k];
        const Tensor<T>& g = *grads[k];
        Tensor<T>& m = m_[k];
        Tensor<T>& v = v_[k];
        for (std::size_t i = 0; i < w.numel(); ++i) {
          m[i] = b1 * m[i] + (T{1} - b1) * g[i];
          v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
          const T mhat = m[i] / c1;
          const T vhat = v[i] / c2;
          w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
      }
    } else {
      const T rho = static_cast<T>(kRho);
      for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor<T>& w = *params_[k];
        const Tensor<T>& g = *grads[k];
        Tensor<T>& v = v_[k];
        for (std::size_t i = 0; i < w.numel(); ++i) {
          v[i] = rho * v[i] + (T{1} - rho) * g[i] * g[i];
          w[i] -= lr * g[i] / (std::sqrt(v[i]) + eps);
        }
      }
    }
  }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kRho = 0.9;
  static constexpr double kEps = 1e-8;

 private:
  OptimizerKind kind_;
  double lr_;
  long step_count_ = 0;
  std::vector<Tensor<T>*> params_;
  std::vector<Tensor<T>> m_, v_;
};

// Flattened view of a GradientSet matching Sequential::trainable_tensors().
template <typename T>
std::vector<const Tensor<T>*> flat_grads(const GradientSet<T>& grads) {
  std::vector<const Tensor<T>*> out;
  for (const auto& layer : grads)
    for (const auto& t : layer) out.push_back(&t);
  return out;
}

}  // namespace topogen::nn

#pragma once

#include <cstdint>
#include <vector>

#include "topogen/core/rng.hpp"
#include "topogen/nn/layers.hpp"
#include "topogen/nn/spec.hpp"
#include "topogen/nn/tensor.hpp"

namespace topogen::nn {

enum class Mode { train, infer };

template <typename T>
struct LayerParams {
  std::vector<Tensor<T>> trainable;  // conv/dense: {weights, bias}; bn: {gamma, beta}
  std::vector<Tensor<T>> state;      // bn: {running_mean, running_var}
};

template <typename T>
struct LayerCache {
  Tensor<T> input;
  Tensor<T> output;  // kept only where backward needs it (sigmoid/tanh)
  std::vector<std::int64_t> argmax;
  detail::BnCache<T> bn;
};

template <typename T>
struct ForwardCache {
  std::vector<LayerCache<T>> layers;
  bool valid = false;
};

template <typename T>
using GradientSet = std::vector<std::vector<Tensor<T>>>;

// An ordered chain of layers with its weights. Weight initialization is
// truncated normal (std 0.02); batchnorm starts at gamma 1, beta 0.
template <typename T>
class Sequential {
 public:
  Sequential() = default;

  Sequential(NetworkSpec spec, FeatureShape input_shape)
      : spec_(std::move(spec)), input_shape_(std::move(input_shape)) {
    shapes_ = infer_shapes(spec_, input_shape_);  // throws SpecError on mismatch
    params_.resize(spec_.layers.size());
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      const FeatureShape& in = i == 0 ? input_shape_ : shapes_[i - 1];
      auto& p = params_[i];
      if (const auto* c = std::get_if<Conv2dSpec>(&spec_.layers[i])) {
        p.trainable.push_back(Tensor<T>({c->kernel, c->kernel, in[2], c->filters}));
        p.trainable.push_back(Tensor<T>({c->filters}));
      } else if (const auto* d = std::get_if<DenseSpec>(&spec_.layers[i])) {
        p.trainable.push_back(Tensor<T>({in[0], d->units}));
        p.trainable.push_back(Tensor<T>({d->units}));
      } else if (std::holds_alternative<BatchNormSpec>(spec_.layers[i])) {
        const int ch = in.size() == 3 ? in[2] : in[0];
        p.trainable.push_back(Tensor<T>({ch}));  // gamma
        p.trainable.push_back(Tensor<T>({ch}));  // beta
        p.state.push_back(Tensor<T>({ch}));      // running mean
        p.state.push_back(Tensor<T>({ch}));      // running var
      }
    }
    reset_non_weight_params();
  }

  void init_weights(Rng& rng) {
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      if (std::holds_alternative<Conv2dSpec>(spec_.layers[i]) ||
          std::holds_alternative<DenseSpec>(spec_.layers[i])) {
        Tensor<T>& w = params_[i].trainable[0];
        for (std::size_t j = 0; j < w.numel(); ++j)
          w[j] = static_cast<T>(rng.truncated_normal(0.02));
        params_[i].trainable[1].fill(T{0});
      }
    }
    reset_non_weight_params();
  }

  const NetworkSpec& spec() const { return spec_; }
  const FeatureShape& input_shape() const { return input_shape_; }
  FeatureShape output_shape() const { return shapes_.empty() ? input_shape_ : shapes_.back(); }
  std::size_t layer_count() const { return spec_.layers.size(); }
  LayerParams<T>& layer(std::size_t i) { return params_[i]; }
  const LayerParams<T>& layer(std::size_t i) const { return params_[i]; }
  std::int64_t parameter_count() const { return param_count(spec_, input_shape_); }

  std::vector<Tensor<T>*> trainable_tensors() {
    std::vector<Tensor<T>*> out;
    for (auto& p : params_)
      for (auto& t : p.trainable) out.push_back(&t);
    return out;
  }
  std::vector<const Tensor<T>*> trainable_tensors() const {
    std::vector<const Tensor<T>*> out;
    for (const auto& p : params_)
      for (const auto& t : p.trainable) out.push_back(&t);
    return out;
  }
  std::vector<Tensor<T>*> state_tensors() {
    std::vector<Tensor<T>*> out;
    for (auto& p : params_)
      for (auto& t : p.state) out.push_back(&t);
    return out;
  }

  GradientSet<T> zero_grads() const {
    GradientSet<T> g(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      for (const auto& t : params_[i].trainable) g[i].emplace_back(t.shape());
    }
    return g;
  }

  // Train mode uses batch statistics and fills `cache` for backward; infer
  // mode uses running statistics. `update_stats` lets callers (gradient
  // checking) run train-mode math without touching the running stats.
  Tensor<T> forward(const Tensor<T>& x, Mode mode, ForwardCache<T>* cache = nullptr,
                    bool update_stats = true) {
    check_input(x);
    if (mode == Mode::train && cache == nullptr)
      throw UsageError("Sequential::forward: train mode requires a cache");
    if (cache) {
      cache->layers.assign(params_.size(), LayerCache<T>{});
      cache->valid = false;
    }
    Tensor<T> cur = x;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      const FeatureShape& in_shape = i == 0 ? input_shape_ : shapes_[i - 1];
      LayerCache<T>* lc = cache ? &cache->layers[i] : nullptr;
      cur = forward_layer(i, cur, in_shape, mode, lc, update_stats);
    }
    if (cache) cache->valid = true;
    return cur;
  }

  // Returns the gradient w.r.t. the network input; accumulates weight
  // gradients into `grads` (shaped like zero_grads()).
  Tensor<T> backward(const Tensor<T>& dy, const ForwardCache<T>& cache,
                     GradientSet<T>& grads) const {
    if (!cache.valid) throw UsageError("Sequential::backward: missing train-mode cache");
    Tensor<T> cur = dy;
    for (std::size_t ri = spec_.layers.size(); ri-- > 0;) {
      cur = backward_layer(ri, cur, cache.layers[ri], grads[ri]);
    }
    return cur;
  }

 private:
  void reset_non_weight_params() {
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      if (std::holds_alternative<BatchNormSpec>(spec_.layers[i])) {
        params_[i].trainable[0].fill(T{1});  // gamma
        params_[i].trainable[1].fill(T{0});  // beta
        params_[i].state[0].fill(T{0});      // running mean
        params_[i].state[1].fill(T{1});      // running var
      }
    }
  }

  void check_input(const Tensor<T>& x) const {
    const int want_rank = static_cast<int>(input_shape_.size()) + 1;
    if (x.rank() != want_rank)
      throw SpecError("Sequential: input rank mismatch, got " +
                      Tensor<T>::shape_str(x.shape()));
    for (std::size_t i = 0; i < input_shape_.size(); ++i) {
      if (x.dim(static_cast<int>(i) + 1) != input_shape_[i])
        throw SpecError("Sequential: input shape mismatch, got " +
                        Tensor<T>::shape_str(x.shape()));
    }
  }

  Tensor<T> forward_layer(std::size_t i, const Tensor<T>& x, const FeatureShape& in_shape,
                          Mode mode, LayerCache<T>* lc, bool update_stats) {
    const LayerSpec& layer = spec_.layers[i];
    auto& p = params_[i];
    const int batch = x.dim(0);

    if (const auto* c = std::get_if<Conv2dSpec>(&layer)) {
      const auto g = detail::conv_geometry(*c, in_shape);
      if (lc) lc->input = x;
      return detail::conv2d_forward(x, p.trainable[0], p.trainable[1], g);
    }
    if (std::get_if<DenseSpec>(&layer)) {
      if (lc) lc->input = x;
      return detail::dense_forward(x, p.trainable[0], p.trainable[1]);
    }
    if (const auto* m = std::get_if<MaxPoolSpec>(&layer)) {
      std::vector<std::int64_t> argmax;
      Tensor<T> y = detail::maxpool_forward(x, m->window, argmax);
      if (lc) {
        lc->input = x;
        lc->argmax = std::move(argmax);
      }
      return y;
    }
    if (std::holds_alternative<BatchNormSpec>(layer)) {
      if (mode == Mode::train) {
        detail::BnCache<T> bn;
        Tensor<T> y = detail::batchnorm_forward_train(x, p.trainable[0], p.trainable[1],
                                                      p.state[0], p.state[1], bn, update_stats);
        if (lc) lc->bn = std::move(bn);
        return y;
      }
      return detail::batchnorm_forward_infer(x, p.trainable[0], p.trainable[1], p.state[0],
                                             p.state[1]);
    }
    if (const auto* a = std::get_if<ActivationSpec>(&layer)) {
      Tensor<T> y = detail::activation_forward(x, a->kind, a->alpha);
      if (lc) {
        lc->input = x;
        if (a->kind == Activation::sigmoid || a->kind == Activation::tanh) lc->output = y;
      }
      return y;
    }
    if (const auto* u = std::get_if<UpsampleSpec>(&layer)) {
      return detail::upsample_forward(x, u->factor);
    }
    if (std::holds_alternative<FlattenSpec>(layer)) {
      return x.reshaped({batch, in_shape[0] * in_shape[1] * in_shape[2]});
    }
    if (const auto* r = std::get_if<ReshapeSpec>(&layer)) {
      return x.reshaped({batch, r->height, r->width, r->channels});
    }
    throw Error("Sequential: unhandled layer");
  }

  Tensor<T> backward_layer(std::size_t i, const Tensor<T>& dy, const LayerCache<T>& lc,
                           std::vector<Tensor<T>>& grad) const {
    const LayerSpec& layer = spec_.layers[i];
    const auto& p = params_[i];
    const FeatureShape& in_shape = i == 0 ? input_shape_ : shapes_[i - 1];
    const int batch = dy.dim(0);

    if (const auto* c = std::get_if<Conv2dSpec>(&layer)) {
      const auto g = detail::conv_geometry(*c, in_shape);
      return detail::conv2d_backward(lc.input, p.trainable[0], dy, g, grad[0], grad[1]);
    }
    if (std::get_if<DenseSpec>(&layer)) {
      return detail::dense_backward(lc.input, p.trainable[0], dy, grad[0], grad[1]);
    }
    if (std::get_if<MaxPoolSpec>(&layer)) {
      return detail::maxpool_backward(lc.input.shape(), dy, lc.argmax);
    }
    if (std::holds_alternative<BatchNormSpec>(layer)) {
      return detail::batchnorm_backward(p.trainable[0], dy, lc.bn, grad[0], grad[1]);
    }
    if (const auto* a = std::get_if<ActivationSpec>(&layer)) {
      return detail::activation_backward(lc.input, lc.output, dy, a->kind, a->alpha);
    }
    if (const auto* u = std::get_if<UpsampleSpec>(&layer)) {
      std::vector<int> in_full{batch, in_shape[0], in_shape[1], in_shape[2]};
      return detail::upsample_backward(in_full, dy, u->factor);
    }
    if (std::holds_alternative<FlattenSpec>(layer)) {
      return dy.reshaped({batch, in_shape[0], in_shape[1], in_shape[2]});
    }
    if (std::get_if<ReshapeSpec>(&layer)) {
      return dy.reshaped({batch, in_shape[0]});
    }
    throw Error("Sequential: unhandled layer");
  }

  NetworkSpec spec_;
  FeatureShape input_shape_;
  std::vector<FeatureShape> shapes_;
  std::vector<LayerParams<T>> params_;
};

// Clamp every trainable weight into [-c, +c]; batchnorm running statistics
// are untouched.
template <typename T>
void clip_weights(Sequential<T>& net, double c) {
  if (!(c > 0.0)) throw ParameterError("clip_weights: c must be > 0");
  const T lo = static_cast<T>(-c), hi = static_cast<T>(c);
  for (Tensor<T>* t : net.trainable_tensors()) {
    for (std::size_t i = 0; i < t->numel(); ++i)
      (*t)[i] = std::min(hi, std::max(lo, (*t)[i]));
  }
}

template <typename T>
T max_abs_weight(const Sequential<T>& net) {
  T m{0};
  for (const Tensor<T>* t : net.trainable_tensors()) {
    for (std::size_t i = 0; i < t->numel(); ++i) m = std::max(m, std::abs((*t)[i]));
  }
  return m;
}

}  // namespace topogen::nn

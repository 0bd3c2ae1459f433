#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <variant>
#include <vector>

#include "topogen/core/error.hpp"

namespace topogen::nn {

using json = nlohmann::json;

enum class Activation { relu, leaky_relu, sigmoid, tanh, none };
enum class Padding { same, valid };

struct Conv2dSpec {
  int kernel = 3;
  int stride = 1;
  Padding padding = Padding::same;
  int filters = 1;
};

struct DenseSpec {
  int units = 1;
};

struct MaxPoolSpec {
  int window = 2;
};

struct BatchNormSpec {};

struct ActivationSpec {
  Activation kind = Activation::relu;
  double alpha = 0.2;  // leaky_relu slope
};

struct UpsampleSpec {
  int factor = 2;
};

struct FlattenSpec {};

struct ReshapeSpec {
  int height = 1;
  int width = 1;
  int channels = 1;
};

using LayerSpec = std::variant<Conv2dSpec, DenseSpec, MaxPoolSpec, BatchNormSpec, ActivationSpec,
                               UpsampleSpec, FlattenSpec, ReshapeSpec>;

// Feature shape without the batch dimension: {H, W, C} or {F}.
using FeatureShape = std::vector<int>;

struct NetworkSpec {
  std::vector<LayerSpec> layers;

  NetworkSpec& conv2d(int kernel, int stride, Padding padding, int filters) {
    layers.push_back(Conv2dSpec{kernel, stride, padding, filters});
    return *this;
  }
  NetworkSpec& dense(int units) {
    layers.push_back(DenseSpec{units});
    return *this;
  }
  NetworkSpec& maxpool(int window) {
    layers.push_back(MaxPoolSpec{window});
    return *this;
  }
  NetworkSpec& batchnorm() {
    layers.push_back(BatchNormSpec{});
    return *this;
  }
  NetworkSpec& activation(Activation kind, double alpha = 0.2) {
    layers.push_back(ActivationSpec{kind, alpha});
    return *this;
  }
  NetworkSpec& upsample(int factor) {
    layers.push_back(UpsampleSpec{factor});
    return *this;
  }
  NetworkSpec& flatten() {
    layers.push_back(FlattenSpec{});
    return *this;
  }
  NetworkSpec& reshape(int h, int w, int c) {
    layers.push_back(ReshapeSpec{h, w, c});
    return *this;
  }

  // Count of layers carrying weights (conv + dense); used for depth
  // comparison between generator and critic.
  int weight_layer_count() const {
    int n = 0;
    for (const auto& l : layers) {
      if (std::holds_alternative<Conv2dSpec>(l) || std::holds_alternative<DenseSpec>(l)) ++n;
    }
    return n;
  }

  bool has_pooling() const {
    for (const auto& l : layers) {
      if (std::holds_alternative<MaxPoolSpec>(l)) return true;
    }
    return false;
  }
};

namespace shape_algebra {

inline int conv_out_dim(int in, int kernel, int stride, Padding padding) {
  if (padding == Padding::same) return (in + stride - 1) / stride;  // ceil
  if (in < kernel) throw SpecError("conv2d: input smaller than kernel with valid padding");
  return (in - kernel) / stride + 1;
}

// Output feature shape of a single layer; throws SpecError on mismatch.
inline FeatureShape layer_out_shape(const LayerSpec& layer, const FeatureShape& in) {
  struct V {
    const FeatureShape& in;
    FeatureShape operator()(const Conv2dSpec& s) const {
      if (in.size() != 3) throw SpecError("conv2d: expects an image input");
      return {conv_out_dim(in[0], s.kernel, s.stride, s.padding),
              conv_out_dim(in[1], s.kernel, s.stride, s.padding), s.filters};
    }
    FeatureShape operator()(const DenseSpec& s) const {
      if (in.size() != 1) throw SpecError("dense: expects a flat input");
      return {s.units};
    }
    FeatureShape operator()(const MaxPoolSpec& s) const {
      if (in.size() != 3) throw SpecError("maxpool: expects an image input");
      if (in[0] < s.window || in[1] < s.window)
        throw SpecError("maxpool: window larger than input");
      return {in[0] / s.window, in[1] / s.window, in[2]};
    }
    FeatureShape operator()(const BatchNormSpec&) const { return in; }
    FeatureShape operator()(const ActivationSpec&) const { return in; }
    FeatureShape operator()(const UpsampleSpec& s) const {
      if (in.size() != 3) throw SpecError("upsample: expects an image input");
      return {in[0] * s.factor, in[1] * s.factor, in[2]};
    }
    FeatureShape operator()(const FlattenSpec&) const {
      if (in.size() != 3) throw SpecError("flatten: expects an image input");
      return {in[0] * in[1] * in[2]};
    }
    FeatureShape operator()(const ReshapeSpec& s) const {
      if (in.size() != 1) throw SpecError("reshape: expects a flat input");
      if (in[0] != s.height * s.width * s.channels)
        throw SpecError("reshape: element count mismatch");
      return {s.height, s.width, s.channels};
    }
  };
  return std::visit(V{in}, layer);
}

}  // namespace shape_algebra

// Per-layer output shapes for a given input; validates composition.
inline std::vector<FeatureShape> infer_shapes(const NetworkSpec& spec, const FeatureShape& input) {
  std::vector<FeatureShape> out;
  FeatureShape cur = input;
  for (const auto& layer : spec.layers) {
    cur = shape_algebra::layer_out_shape(layer, cur);
    out.push_back(cur);
  }
  return out;
}

inline FeatureShape output_shape(const NetworkSpec& spec, const FeatureShape& input) {
  FeatureShape cur = input;
  for (const auto& layer : spec.layers) cur = shape_algebra::layer_out_shape(layer, cur);
  return cur;
}

// Closed-form parameter count: trainable weights plus batchnorm running
// statistics (the "total params" convention of common frameworks).
inline std::int64_t param_count(const NetworkSpec& spec, const FeatureShape& input) {
  std::int64_t total = 0;
  FeatureShape cur = input;
  for (const auto& layer : spec.layers) {
    if (const auto* c = std::get_if<Conv2dSpec>(&layer)) {
      total += std::int64_t(c->kernel) * c->kernel * cur[2] * c->filters + c->filters;
    } else if (const auto* d = std::get_if<DenseSpec>(&layer)) {
      total += std::int64_t(cur[0]) * d->units + d->units;
    } else if (std::holds_alternative<BatchNormSpec>(layer)) {
      const int ch = cur.size() == 3 ? cur[2] : cur[0];
      total += 4 * std::int64_t(ch);  // gamma, beta, running mean, running var
    }
    cur = shape_algebra::layer_out_shape(layer, cur);
  }
  return total;
}

// ---- JSON (de)serialization, used by the checkpoint container ----

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::none: return "none";
  }
  throw Error("unknown activation");
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "leaky_relu") return Activation::leaky_relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  if (s == "none") return Activation::none;
  throw IntegrityError("unknown activation: " + s);
}

inline json layer_to_json(const LayerSpec& layer) {
  struct V {
    json operator()(const Conv2dSpec& s) const {
      return {{"type", "conv2d"},
              {"kernel", s.kernel},
              {"stride", s.stride},
              {"padding", s.padding == Padding::same ? "same" : "valid"},
              {"filters", s.filters}};
    }
    json operator()(const DenseSpec& s) const { return {{"type", "dense"}, {"units", s.units}}; }
    json operator()(const MaxPoolSpec& s) const {
      return {{"type", "maxpool"}, {"window", s.window}};
    }
    json operator()(const BatchNormSpec&) const { return {{"type", "batchnorm"}}; }
    json operator()(const ActivationSpec& s) const {
      return {{"type", "activation"}, {"kind", to_string(s.kind)}, {"alpha", s.alpha}};
    }
    json operator()(const UpsampleSpec& s) const {
      return {{"type", "upsample"}, {"factor", s.factor}};
    }
    json operator()(const FlattenSpec&) const { return {{"type", "flatten"}}; }
    json operator()(const ReshapeSpec& s) const {
      return {{"type", "reshape"}, {"height", s.height}, {"width", s.width},
              {"channels", s.channels}};
    }
  };
  return std::visit(V{}, layer);
}

inline LayerSpec layer_from_json(const json& j) {
  const std::string type = j.at("type");
  if (type == "conv2d")
    return Conv2dSpec{j.at("kernel"), j.at("stride"),
                      j.at("padding") == "same" ? Padding::same : Padding::valid,
                      j.at("filters")};
  if (type == "dense") return DenseSpec{j.at("units")};
  if (type == "maxpool") return MaxPoolSpec{j.at("window")};
  if (type == "batchnorm") return BatchNormSpec{};
  if (type == "activation")
    return ActivationSpec{activation_from_string(j.at("kind")), j.at("alpha")};
  if (type == "upsample") return UpsampleSpec{j.at("factor")};
  if (type == "flatten") return FlattenSpec{};
  if (type == "reshape") return ReshapeSpec{j.at("height"), j.at("width"), j.at("channels")};
  throw IntegrityError("unknown layer type: " + type);
}

inline json spec_to_json(const NetworkSpec& spec) {
  json arr = json::array();
  for (const auto& l : spec.layers) arr.push_back(layer_to_json(l));
  return arr;
}

inline NetworkSpec spec_from_json(const json& arr) {
  NetworkSpec spec;
  for (const auto& j : arr) spec.layers.push_back(layer_from_json(j));
  return spec;
}

}  // namespace topogen::nn

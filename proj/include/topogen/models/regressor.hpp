#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "topogen/core/resample.hpp"
#include "topogen/data/dataset.hpp"
#include "topogen/nn/checkpoint.hpp"
#include "topogen/nn/loss.hpp"
#include "topogen/nn/network.hpp"
#include "topogen/nn/optimizer.hpp"
#include "topogen/nn/training_log.hpp"

namespace topogen::models {

using data::Dataset;
using data::DesignParams;
using nn::NetworkSpec;

// Channel widths of the regressor. The full profile lands near the published
// total parameter count; the desk profile scales channels down 4x for CI.
struct RegressorProfile {
  std::string name = "desk";
  std::array<int, 3> trunk_channels{4, 8, 16};
  std::array<int, 2> ext_channels{16, 32};
  int head_hidden = 224;

  static RegressorProfile full() { return {"full", {16, 32, 64}, {64, 128}, 896}; }
  static RegressorProfile desk() { return {}; }
  static RegressorProfile named(const std::string& n) {
    if (n == "full") return full();
    if (n == "desk") return desk();
    throw ParameterError("unknown regressor profile: " + n);
  }
};

// The three-headed topology: a shared trunk, the vol_frac head branching
// right after it, then two extension segments feeding the penal and r_min
// heads. vol_frac branches earliest; r_min deepest. Hidden activations are
// ReLU; head outputs are linear scalars.
struct RegressorSpec {
  nn::FeatureShape input;  // {side, side, 1}
  NetworkSpec trunk;       // 3 x [conv -> relu -> maxpool -> batchnorm]
  NetworkSpec ext1;        // 1 block, feeds the penal head
  NetworkSpec ext2;        // 1 block, feeds the r_min head
  NetworkSpec head_vol_frac;
  NetworkSpec head_penal;
  NetworkSpec head_r_min;

  std::int64_t parameter_count() const {
    using nn::output_shape;
    std::int64_t total = nn::param_count(trunk, input);
    const auto t = output_shape(trunk, input);
    total += nn::param_count(head_vol_frac, t);
    total += nn::param_count(ext1, t);
    const auto e1 = output_shape(ext1, t);
    total += nn::param_count(head_penal, e1);
    total += nn::param_count(ext2, e1);
    total += nn::param_count(head_r_min, output_shape(ext2, e1));
    return total;
  }
};

namespace detail {

inline void conv_block(NetworkSpec& spec, int filters) {
  spec.conv2d(3, 1, nn::Padding::same, filters)
      .activation(nn::Activation::relu)
      .maxpool(2)
      .batchnorm();
}

}  // namespace detail

inline RegressorSpec build_regressor(int input_side, const RegressorProfile& profile = {}) {
  if (input_side < 8 || input_side % 8 != 0)
    throw SpecError("build_regressor: input side must be divisible by 8");
  if (input_side / 8 < 4)
    throw SpecError("build_regressor: input side too small for the extension blocks");

  RegressorSpec spec;
  spec.input = {input_side, input_side, 1};
  for (int ch : profile.trunk_channels) detail::conv_block(spec.trunk, ch);
  detail::conv_block(spec.ext1, profile.ext_channels[0]);
  detail::conv_block(spec.ext2, profile.ext_channels[1]);
  spec.head_vol_frac.flatten().dense(1);
  spec.head_penal.flatten().dense(1);
  spec.head_r_min.flatten().dense(profile.head_hidden).activation(nn::Activation::relu).dense(1);

  // composition check across all six chains
  const auto t = nn::output_shape(spec.trunk, spec.input);
  nn::output_shape(spec.head_vol_frac, t);
  const auto e1 = nn::output_shape(spec.ext1, t);
  nn::output_shape(spec.head_penal, e1);
  const auto e2 = nn::output_shape(spec.ext2, e1);
  nn::output_shape(spec.head_r_min, e2);
  return spec;
}

struct RegressorPrediction {
  double vol_frac = 0.0;
  double penal = 0.0;
  double r_min = 0.0;
};

template <typename T>
struct RegressorModel {
  nn::Sequential<T> trunk, ext1, ext2, head_vol_frac, head_penal, head_r_min;
  double vol_frac_mean = 0.0, vol_frac_std = 1.0;
  double penal_mean = 0.0, penal_std = 1.0;
  double r_min_mean = 0.0, r_min_std = 1.0;
  std::string profile_name;
  int input_side = 0;

  static RegressorModel build(const RegressorSpec& spec, const std::string& profile_name,
                              Rng& rng) {
    RegressorModel m;
    m.input_side = spec.input[0];
    m.profile_name = profile_name;
    const auto t = nn::output_shape(spec.trunk, spec.input);
    const auto e1 = nn::output_shape(spec.ext1, t);
    const auto e2 = nn::output_shape(spec.ext2, e1);
    m.trunk = nn::Sequential<T>(spec.trunk, spec.input);
    m.ext1 = nn::Sequential<T>(spec.ext1, t);
    m.ext2 = nn::Sequential<T>(spec.ext2, e1);
    m.head_vol_frac = nn::Sequential<T>(spec.head_vol_frac, t);
    m.head_penal = nn::Sequential<T>(spec.head_penal, e1);
    m.head_r_min = nn::Sequential<T>(spec.head_r_min, e2);
    for (auto* net : {&m.trunk, &m.head_vol_frac, &m.ext1, &m.head_penal, &m.ext2, &m.head_r_min})
      net->init_weights(rng);
    return m;
  }

  std::vector<nn::Tensor<T>*> all_trainable() {
    std::vector<nn::Tensor<T>*> out;
    for (auto* net : {&trunk, &ext1, &ext2, &head_vol_frac, &head_penal, &head_r_min}) {
      for (auto* t : net->trainable_tensors()) out.push_back(t);
    }
    return out;
  }

  // Raw three-head outputs for a batch, inference mode.
  std::array<nn::Tensor<T>, 3> forward_infer(const nn::Tensor<T>& x) {
    nn::Tensor<T> t = trunk.forward(x, nn::Mode::infer);
    nn::Tensor<T> a = head_vol_frac.forward(t, nn::Mode::infer);
    nn::Tensor<T> e1 = ext1.forward(t, nn::Mode::infer);
    nn::Tensor<T> b = head_penal.forward(e1, nn::Mode::infer);
    nn::Tensor<T> e2 = ext2.forward(e1, nn::Mode::infer);
    nn::Tensor<T> c = head_r_min.forward(e2, nn::Mode::infer);
    return {std::move(a), std::move(b), std::move(c)};
  }

  RegressorPrediction predict(const Grid& image) {
    if (image.rows() != input_side || image.cols() != input_side)
      throw DataError("RegressorModel::predict: image shape does not match model input");
    nn::Tensor<T> x({1, input_side, input_side, 1});
    for (std::size_t i = 0; i < image.size(); ++i) x[i] = static_cast<T>(image[i]);
    auto heads = forward_infer(x);
    RegressorPrediction p;
    p.vol_frac = static_cast<double>(heads[0][0]) * vol_frac_std + vol_frac_mean;
    p.penal = static_cast<double>(heads[1][0]) * penal_std + penal_mean;
    p.r_min = static_cast<double>(heads[2][0]) * r_min_std + r_min_mean;
    return p;
  }

  void save(const std::filesystem::path& path, const nn::json& extra_meta = {}) const {
    nn::CheckpointWriter w;
    nn::json meta;
    meta["kind"] = "regressor";
    meta["profile"] = profile_name;
    meta["input_side"] = input_side;
    meta["vol_frac_mean"] = vol_frac_mean;
    meta["vol_frac_std"] = vol_frac_std;
    meta["penal_mean"] = penal_mean;
    meta["penal_std"] = penal_std;
    meta["r_min_mean"] = r_min_mean;
    meta["r_min_std"] = r_min_std;
    if (!extra_meta.is_null()) meta["train"] = extra_meta;
    w.add_meta("model", meta);
    w.add_network("trunk", trunk);
    w.add_network("ext1", ext1);
    w.add_network("ext2", ext2);
    w.add_network("head_vol_frac", head_vol_frac);
    w.add_network("head_penal", head_penal);
    w.add_network("head_r_min", head_r_min);
    w.save(path);
  }

  static RegressorModel load(const std::filesystem::path& path) {
    nn::CheckpointReader r = nn::CheckpointReader::open(path);
    const nn::json& meta = r.meta().at("model");
    if (meta.at("kind") != "regressor") throw IntegrityError("checkpoint is not a regressor");
    RegressorModel m;
    m.profile_name = meta.at("profile");
    m.input_side = meta.at("input_side");
    m.vol_frac_mean = meta.at("vol_frac_mean");
    m.vol_frac_std = meta.at("vol_frac_std");
    m.penal_mean = meta.at("penal_mean");
    m.penal_std = meta.at("penal_std");
    m.r_min_mean = meta.at("r_min_mean");
    m.r_min_std = meta.at("r_min_std");
    m.trunk = r.network<T>("trunk");
    m.ext1 = r.network<T>("ext1");
    m.ext2 = r.network<T>("ext2");
    m.head_vol_frac = r.network<T>("head_vol_frac");
    m.head_penal = r.network<T>("head_penal");
    m.head_r_min = r.network<T>("head_r_min");
    return m;
  }
};

struct RegressorHyper {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 2e-4;  // Adam
  double val_fraction = 0.1;
  std::uint64_t seed = 1;
};

struct RegressorEvaluation {
  double mae_vol_frac = 0.0;
  double mae_penal = 0.0;
  double mae_r_min = 0.0;
  // constant-mean-predictor baselines on the same fold
  double baseline_penal = 0.0;
  double baseline_r_min = 0.0;
  double baseline_mean_pixel_vol_frac = 0.0;  // analytic mean-pixel predictor
  int count = 0;
};

struct RegressorTrainResult {
  RegressorModel<float> model;
  nn::TrainingLog log;  // epoch, train_loss, val_loss
  RegressorEvaluation val;
  data::SplitIndices split;
};

namespace detail {

inline nn::Tensor<float> images_to_tensor(const Dataset& ds,
                                          const std::vector<std::size_t>& idx, int side) {
  nn::Tensor<float> x({static_cast<int>(idx.size()), side, side, 1});
  std::size_t off = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Grid img = resample_area(ds.samples[idx[k]].image, side, side);
    for (std::size_t i = 0; i < img.size(); ++i) x[off++] = static_cast<float>(img[i]);
  }
  return x;
}

}  // namespace detail

// Minimizes the unweighted sum of the three per-head MSE terms with Adam.
// All three targets are standardized from the training fold so that no head
// dominates the summed loss; predictions are un-standardized.
inline RegressorTrainResult train_regressor(const Dataset& ds, int input_side,
                                            const RegressorProfile& profile,
                                            const RegressorHyper& hyper) {
  if (ds.samples.empty()) throw ParameterError("train_regressor: empty dataset");
  for (const auto& s : ds.samples) {
    if (!std::isfinite(s.label.vol_frac) || !std::isfinite(s.label.penal) ||
        !std::isfinite(s.label.r_min))
      throw DataError("train_regressor: non-finite label");
  }

  RegressorTrainResult result;
  const RegressorSpec spec = build_regressor(input_side, profile);
  Rng init_rng(Rng::derive(hyper.seed, 0x696e6974));
  result.model = RegressorModel<float>::build(spec, profile.name, init_rng);
  RegressorModel<float>& m = result.model;

  result.split = data::split_dataset(ds, hyper.val_fraction, hyper.seed);
  const auto& train_idx = result.split.train;
  const auto& val_idx = result.split.val;
  if (train_idx.empty()) throw ParameterError("train_regressor: empty training fold");

  double vm = 0.0, pm = 0.0, rm = 0.0;
  for (std::size_t i : train_idx) {
    vm += ds.samples[i].label.vol_frac;
    pm += ds.samples[i].label.penal;
    rm += ds.samples[i].label.r_min;
  }
  const double nt = static_cast<double>(train_idx.size());
  vm /= nt;
  pm /= nt;
  rm /= nt;
  double vv = 0.0, pv = 0.0, rv = 0.0;
  for (std::size_t i : train_idx) {
    const auto& l = ds.samples[i].label;
    vv += (l.vol_frac - vm) * (l.vol_frac - vm);
    pv += (l.penal - pm) * (l.penal - pm);
    rv += (l.r_min - rm) * (l.r_min - rm);
  }
  m.vol_frac_mean = vm;
  m.vol_frac_std = std::max(1e-9, std::sqrt(vv / nt));
  m.penal_mean = pm;
  m.penal_std = std::max(1e-9, std::sqrt(pv / nt));
  m.r_min_mean = rm;
  m.r_min_std = std::max(1e-9, std::sqrt(rv / nt));

  // pre-rendered input tensors (one row per sample)
  const nn::Tensor<float> x_train = detail::images_to_tensor(ds, train_idx, input_side);
  const nn::Tensor<float> x_val =
      val_idx.empty() ? nn::Tensor<float>() : detail::images_to_tensor(ds, val_idx, input_side);

  auto targets = [&](const std::vector<std::size_t>& idx, int head) {
    nn::Tensor<float> t({static_cast<int>(idx.size()), 1});
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const DesignParams& l = ds.samples[idx[k]].label;
      double v = head == 0 ? (l.vol_frac - m.vol_frac_mean) / m.vol_frac_std
                           : head == 1 ? (l.penal - m.penal_mean) / m.penal_std
                                       : (l.r_min - m.r_min_mean) / m.r_min_std;
      t[k] = static_cast<float>(v);
    }
    return t;
  };
  const nn::Tensor<float> y_train[3] = {targets(train_idx, 0), targets(train_idx, 1),
                                        targets(train_idx, 2)};

  nn::Optimizer<float> opt(nn::OptimizerKind::adam, hyper.learning_rate);
  opt.attach(m.all_trainable());

  auto slice_rows = [](const nn::Tensor<float>& src, const std::vector<int>& rows, int side) {
    nn::Tensor<float> out({static_cast<int>(rows.size()), side, side, 1});
    const std::size_t row_len = static_cast<std::size_t>(side) * side;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const float* s = src.data() + rows[k] * row_len;
      std::copy(s, s + row_len, out.data() + k * row_len);
    }
    return out;
  };
  auto slice_scalar = [](const nn::Tensor<float>& src, const std::vector<int>& rows) {
    nn::Tensor<float> out({static_cast<int>(rows.size()), 1});
    for (std::size_t k = 0; k < rows.size(); ++k) out[k] = src[rows[k]];
    return out;
  };

  auto eval_loss = [&](const nn::Tensor<float>& x, const nn::Tensor<float>& yv,
                       const nn::Tensor<float>& yp, const nn::Tensor<float>& yr) {
    nn::Tensor<float> t = m.trunk.forward(x, nn::Mode::infer);
    nn::Tensor<float> a = m.head_vol_frac.forward(t, nn::Mode::infer);
    nn::Tensor<float> e1 = m.ext1.forward(t, nn::Mode::infer);
    nn::Tensor<float> b = m.head_penal.forward(e1, nn::Mode::infer);
    nn::Tensor<float> e2 = m.ext2.forward(e1, nn::Mode::infer);
    nn::Tensor<float> c = m.head_r_min.forward(e2, nn::Mode::infer);
    return nn::mse_loss(a, yv).first + nn::mse_loss(b, yp).first + nn::mse_loss(c, yr).first;
  };

  Rng shuffle_rng(Rng::derive(hyper.seed, 0x73687566));
  std::vector<int> order(train_idx.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  result.log.columns = {"epoch", "train_loss", "val_loss"};
  const int batch = std::max(1, hyper.batch_size);
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    shuffle_rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::vector<int> rows(order.begin() + start,
                                  order.begin() + std::min(order.size(), start + batch));
      const nn::Tensor<float> xb = slice_rows(x_train, rows, input_side);
      const nn::Tensor<float> yv = slice_scalar(y_train[0], rows);
      const nn::Tensor<float> yp = slice_scalar(y_train[1], rows);
      const nn::Tensor<float> yr = slice_scalar(y_train[2], rows);

      nn::ForwardCache<float> ct, ca, ce1, cb, ce2, cc;
      nn::Tensor<float> t = m.trunk.forward(xb, nn::Mode::train, &ct);
      nn::Tensor<float> a = m.head_vol_frac.forward(t, nn::Mode::train, &ca);
      nn::Tensor<float> e1 = m.ext1.forward(t, nn::Mode::train, &ce1);
      nn::Tensor<float> b = m.head_penal.forward(e1, nn::Mode::train, &cb);
      nn::Tensor<float> e2 = m.ext2.forward(e1, nn::Mode::train, &ce2);
      nn::Tensor<float> c = m.head_r_min.forward(e2, nn::Mode::train, &cc);

      auto [la, da] = nn::mse_loss(a, yv);
      auto [lb, db] = nn::mse_loss(b, yp);
      auto [lc, dc] = nn::mse_loss(c, yr);
      const double loss = la + lb + lc;
      if (!std::isfinite(loss))
        throw TrainingError("train_regressor: non-finite loss at epoch " +
                            std::to_string(epoch));
      epoch_loss += loss;
      ++batches;

      auto g_trunk = m.trunk.zero_grads();
      auto g_ext1 = m.ext1.zero_grads();
      auto g_ext2 = m.ext2.zero_grads();
      auto g_ha = m.head_vol_frac.zero_grads();
      auto g_hb = m.head_penal.zero_grads();
      auto g_hc = m.head_r_min.zero_grads();

      nn::Tensor<float> dt_a = m.head_vol_frac.backward(da, ca, g_ha);
      nn::Tensor<float> de1_b = m.head_penal.backward(db, cb, g_hb);
      nn::Tensor<float> de2_c = m.head_r_min.backward(dc, cc, g_hc);
      nn::Tensor<float> de1_ext2 = m.ext2.backward(de2_c, ce2, g_ext2);
      for (std::size_t i = 0; i < de1_b.numel(); ++i) de1_b[i] += de1_ext2[i];
      nn::Tensor<float> dt_ext1 = m.ext1.backward(de1_b, ce1, g_ext1);
      for (std::size_t i = 0; i < dt_a.numel(); ++i) dt_a[i] += dt_ext1[i];
      m.trunk.backward(dt_a, ct, g_trunk);

      // optimizer param order must match all_trainable(): trunk, ext1, ext2, heads
      std::vector<const nn::Tensor<float>*> ordered;
      auto push_all = [&](const nn::GradientSet<float>& g) {
        for (const auto& layer : g)
          for (const auto& t2 : layer) ordered.push_back(&t2);
      };
      push_all(g_trunk);
      push_all(g_ext1);
      push_all(g_ext2);
      push_all(g_ha);
      push_all(g_hb);
      push_all(g_hc);
      opt.step(ordered);
    }

    const double train_loss = epoch_loss / std::max(1, batches);
    double val_loss = 0.0;
    if (!val_idx.empty()) {
      val_loss = eval_loss(x_val, targets(val_idx, 0), targets(val_idx, 1), targets(val_idx, 2));
    }
    result.log.add_row({static_cast<double>(epoch), train_loss, val_loss});
  }

  // held-out evaluation in label units
  if (!val_idx.empty()) {
    RegressorEvaluation& ev = result.val;
    ev.count = static_cast<int>(val_idx.size());
    const double train_penal_mean = pm, train_r_min_mean = rm;
    for (std::size_t k = 0; k < val_idx.size(); ++k) {
      const data::Sample& s = ds.samples[val_idx[k]];
      const Grid img = resample_area(s.image, input_side, input_side);
      const RegressorPrediction p = m.predict(img);
      ev.mae_vol_frac += std::abs(p.vol_frac - s.label.vol_frac);
      ev.mae_penal += std::abs(p.penal - s.label.penal);
      ev.mae_r_min += std::abs(p.r_min - s.label.r_min);
      ev.baseline_penal += std::abs(train_penal_mean - s.label.penal);
      ev.baseline_r_min += std::abs(train_r_min_mean - s.label.r_min);
      ev.baseline_mean_pixel_vol_frac += std::abs(img.mean() - s.label.vol_frac);
    }
    const double n = static_cast<double>(val_idx.size());
    ev.mae_vol_frac /= n;
    ev.mae_penal /= n;
    ev.mae_r_min /= n;
    ev.baseline_penal /= n;
    ev.baseline_r_min /= n;
    ev.baseline_mean_pixel_vol_frac /= n;
  }
  return result;
}

}  // namespace topogen::models

#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "topogen/core/resample.hpp"
#include "topogen/data/dataset.hpp"
#include "topogen/nn/checkpoint.hpp"
#include "topogen/nn/loss.hpp"
#include "topogen/nn/network.hpp"
#include "topogen/nn/optimizer.hpp"

namespace topogen::models {

// Critic objective: pure Wasserstein score difference, or the smoothed
// +-0.9 target variant the study describes alongside it.
enum class GanLossMode { wasserstein, smoothed };

struct GanConfig {
  int latent_dim = 100;
  double critic_lr = 5e-5;     // RMSProp
  double generator_lr = 5e-5;  // RMSProp
  double leaky_alpha = 0.2;
  double clip_c = 0.01;
  int n_critic = 1;
  double label_real = -0.9;  // smoothed targets: real -> -0.9, fake -> +0.9
  double label_fake = 0.9;
  int batch_size = 64;
  int generator_steps = 2000;
  GanLossMode loss_mode = GanLossMode::wasserstein;
  bool critic_batchnorm = true;

  // architecture profile
  int image_side = 32;
  int base_side = 4;       // generator projects latent to base_side^2 feature maps
  int base_channels = 64;  // channels of that projection
  std::vector<int> generator_channels{48, 32, 16};  // per upsample stage
  std::vector<int> critic_channels{24, 32, 48};     // per stride-2 stage

  void validate() const {
    if (latent_dim < 1) throw ParameterError("GanConfig: latent_dim must be >= 1");
    if (!(clip_c > 0.0)) throw ParameterError("GanConfig: clip constant must be > 0");
    if (n_critic < 1) throw ParameterError("GanConfig: n_critic must be >= 1");
    if (batch_size < 1) throw ParameterError("GanConfig: batch_size must be >= 1");
    if (generator_steps < 1) throw ParameterError("GanConfig: generator_steps must be >= 1");
    if (!(critic_lr > 0.0 && generator_lr > 0.0))
      throw ParameterError("GanConfig: learning rates must be > 0");
  }

  static GanConfig desk() { return {}; }

  static GanConfig full() {
    GanConfig c;
    c.image_side = 120;
    c.base_side = 15;
    c.base_channels = 64;
    c.generator_channels = {64, 48, 32};
    c.critic_channels = {32, 64, 128};
    return c;
  }

  static GanConfig named(const std::string& n) {
    if (n == "desk") return desk();
    if (n == "full") return full();
    throw ParameterError("unknown gan profile: " + n);
  }
};

inline void to_json(nlohmann::json& j, const GanConfig& c) {
  j = {{"latent_dim", c.latent_dim},
       {"critic_lr", c.critic_lr},
       {"generator_lr", c.generator_lr},
       {"leaky_alpha", c.leaky_alpha},
       {"clip_c", c.clip_c},
       {"n_critic", c.n_critic},
       {"label_real", c.label_real},
       {"label_fake", c.label_fake},
       {"batch_size", c.batch_size},
       {"generator_steps", c.generator_steps},
       {"loss_mode", c.loss_mode == GanLossMode::wasserstein ? "wasserstein" : "smoothed"},
       {"critic_batchnorm", c.critic_batchnorm},
       {"image_side", c.image_side},
       {"base_side", c.base_side},
       {"base_channels", c.base_channels},
       {"generator_channels", c.generator_channels},
       {"critic_channels", c.critic_channels}};
}

inline void from_json(const nlohmann::json& j, GanConfig& c) {
  j.at("latent_dim").get_to(c.latent_dim);
  j.at("critic_lr").get_to(c.critic_lr);
  j.at("generator_lr").get_to(c.generator_lr);
  j.at("leaky_alpha").get_to(c.leaky_alpha);
  j.at("clip_c").get_to(c.clip_c);
  j.at("n_critic").get_to(c.n_critic);
  j.at("label_real").get_to(c.label_real);
  j.at("label_fake").get_to(c.label_fake);
  j.at("batch_size").get_to(c.batch_size);
  j.at("generator_steps").get_to(c.generator_steps);
  c.loss_mode = j.at("loss_mode") == "smoothed" ? GanLossMode::smoothed
                                                : GanLossMode::wasserstein;
  j.at("critic_batchnorm").get_to(c.critic_batchnorm);
  j.at("image_side").get_to(c.image_side);
  j.at("base_side").get_to(c.base_side);
  j.at("base_channels").get_to(c.base_channels);
  j.at("generator_channels").get_to(c.generator_channels);
  j.at("critic_channels").get_to(c.critic_channels);
}

// Latent vector to image: dense projection, then upsample-conv stages, no
// pooling anywhere, sigmoid output so densities live in [0, 1].
inline nn::NetworkSpec build_generator(const GanConfig& config, int output_side) {
  config.validate();
  int stages = 0;
  int side = output_side;
  while (side > config.base_side && side % 2 == 0) {
    side /= 2;
    ++stages;
  }
  if (side != config.base_side)
    throw SpecError("build_generator: output side must be base_side * 2^k");
  if (static_cast<int>(config.generator_channels.size()) < stages)
    throw SpecError("build_generator: not enough stage channel entries");

  nn::NetworkSpec g;
  g.dense(config.base_side * config.base_side * config.base_channels)
      .reshape(config.base_side, config.base_side, config.base_channels)
      .batchnorm()
      .activation(nn::Activation::leaky_relu, config.leaky_alpha);
  for (int s = 0; s < stages; ++s) {
    g.upsample(2)
        .conv2d(3, 1, nn::Padding::same, config.generator_channels[s])
        .batchnorm()
        .activation(nn::Activation::leaky_relu, config.leaky_alpha);
  }
  g.conv2d(3, 1, nn::Padding::same, 1).activation(nn::Activation::sigmoid);
  return g;
}

// Image to scalar score in (-1, 1): strided convs (batchnorm after every
// layer as described, configurable off), leaky ReLU, tanh head. Shallower
// than the generator.
inline nn::NetworkSpec build_critic(const GanConfig& config, int input_side) {
  config.validate();
  if (input_side < 8) throw SpecError("build_critic: input side must be >= 8");
  nn::NetworkSpec c;
  for (int ch : config.critic_channels) {
    c.conv2d(3, 2, nn::Padding::same, ch);
    if (config.critic_batchnorm) c.batchnorm();
    c.activation(nn::Activation::leaky_relu, config.leaky_alpha);
  }
  c.flatten().dense(1).activation(nn::Activation::tanh);
  return c;
}

template <typename T>
struct TrainedGAN {
  nn::Sequential<T> generator;
  nn::Sequential<T> critic;
  std::vector<double> critic_estimates;  // one per generator step
  GanConfig config;
  std::uint64_t seed = 0;

  void save(const std::filesystem::path& path) const {
    nn::CheckpointWriter w;
    nn::json meta;
    meta["kind"] = "wgan";
    meta["config"] = config;
    meta["seed"] = seed;
    meta["critic_estimates"] = critic_estimates;
    w.add_meta("model", meta);
    w.add_network("generator", generator);
    w.add_network("critic", critic);
    w.save(path);
  }

  static TrainedGAN load(const std::filesystem::path& path) {
    nn::CheckpointReader r = nn::CheckpointReader::open(path);
    const nn::json& meta = r.meta().at("model");
    if (meta.at("kind") != "wgan") throw IntegrityError("checkpoint is not a wgan bundle");
    TrainedGAN g;
    g.config = meta.at("config").get<GanConfig>();
    g.seed = meta.at("seed");
    g.critic_estimates = meta.at("critic_estimates").get<std::vector<double>>();
    g.generator = r.network<T>("generator");
    g.critic = r.network<T>("critic");
    return g;
  }
};

namespace detail {

template <typename T>
nn::Tensor<T> sample_latent(Rng& rng, int batch, int latent_dim) {
  nn::Tensor<T> z({batch, latent_dim});
  for (std::size_t i = 0; i < z.numel(); ++i) z[i] = static_cast<T>(rng.normal());
  return z;
}

template <typename T>
void add_grads(nn::GradientSet<T>& into, const nn::GradientSet<T>& from) {
  for (std::size_t l = 0; l < into.size(); ++l) {
    for (std::size_t t = 0; t < into[l].size(); ++t) {
      for (std::size_t i = 0; i < into[l][t].numel(); ++i) into[l][t][i] += from[l][t][i];
    }
  }
}

}  // namespace detail

// Alternates n_critic critic updates (clipping after each) with one
// generator update, both on RMSProp. Records the critic's score separation
// mean(real) - mean(fake) after each step's critic phase. Deterministic for
// a fixed seed. On non-finite loss the last consistent weights are saved to
// `rescue_path` (when given) before the error is thrown.
inline TrainedGAN<float> train_wgan(const data::Dataset& dataset, const GanConfig& config,
                                    std::uint64_t seed,
                                    const std::optional<std::filesystem::path>& rescue_path = {}) {
  config.validate();
  if (dataset.samples.empty()) throw ParameterError("train_wgan: empty dataset");

  const int side = config.image_side;
  const int n = static_cast<int>(dataset.samples.size());

  // real image pool at training resolution
  std::vector<nn::Tensor<float>> pool;
  pool.reserve(n);
  for (const auto& s : dataset.samples) {
    const Grid img = resample_area(s.image, side, side);
    nn::Tensor<float> t({side, side, 1});
    for (std::size_t i = 0; i < img.size(); ++i) {
      const double v = std::min(1.0, std::max(0.0, img[i]));
      t[i] = static_cast<float>(v);
    }
    pool.push_back(std::move(t));
  }

  TrainedGAN<float> gan;
  gan.config = config;
  gan.seed = seed;
  Rng init_rng(Rng::derive(seed, 0x67616e69));
  gan.generator = nn::Sequential<float>(build_generator(config, side),
                                        {config.latent_dim});
  gan.critic = nn::Sequential<float>(build_critic(config, side), {side, side, 1});
  gan.generator.init_weights(init_rng);
  gan.critic.init_weights(init_rng);

  nn::Optimizer<float> opt_c(nn::OptimizerKind::rmsprop, config.critic_lr);
  nn::Optimizer<float> opt_g(nn::OptimizerKind::rmsprop, config.generator_lr);
  opt_c.attach(gan.critic.trainable_tensors());
  opt_g.attach(gan.generator.trainable_tensors());

  Rng data_rng(Rng::derive(seed, 0x64617461));
  Rng z_rng(Rng::derive(seed, 0x7a7a7a));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::size_t cursor = order.size();  // forces an initial shuffle

  const int b = config.batch_size;
  auto next_real_batch = [&]() {
    nn::Tensor<float> x({b, side, side, 1});
    const std::size_t img_len = static_cast<std::size_t>(side) * side;
    for (int k = 0; k < b; ++k) {
      if (cursor >= order.size()) {
        data_rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      const auto& src = pool[static_cast<std::size_t>(order[cursor++])];
      std::copy(src.data(), src.data() + img_len, x.data() + k * img_len);
    }
    return x;
  };

  auto rescue = [&](const std::string& what) {
    if (rescue_path) gan.save(*rescue_path);
    throw TrainingError("train_wgan: " + what +
                        (rescue_path ? " (last-good weights saved to " + rescue_path->string() +
                                           ")"
                                     : ""));
  };

  const float inv_b = 1.0f / static_cast<float>(b);
  for (int step = 0; step < config.generator_steps; ++step) {
    double estimate = 0.0;
    for (int j = 0; j < config.n_critic; ++j) {
      const nn::Tensor<float> real = next_real_batch();
      const nn::Tensor<float> z = detail::sample_latent<float>(z_rng, b, config.latent_dim);
      nn::ForwardCache<float> gen_cache;
      const nn::Tensor<float> fake =
          gan.generator.forward(z, nn::Mode::train, &gen_cache, /*update_stats=*/false);

      nn::ForwardCache<float> cr, cf;
      const nn::Tensor<float> s_real = gan.critic.forward(real, nn::Mode::train, &cr);
      const nn::Tensor<float> s_fake = gan.critic.forward(fake, nn::Mode::train, &cf);

      double mean_real = 0.0, mean_fake = 0.0;
      for (int k = 0; k < b; ++k) {
        mean_real += s_real[static_cast<std::size_t>(k)];
        mean_fake += s_fake[static_cast<std::size_t>(k)];
      }
      mean_real /= b;
      mean_fake /= b;
      estimate = mean_real - mean_fake;
      if (!std::isfinite(estimate)) rescue("non-finite critic scores");

      // d(critic loss)/d(scores)
      nn::Tensor<float> d_real({b, 1}), d_fake({b, 1});
      if (config.loss_mode == GanLossMode::wasserstein) {
        d_real.fill(-inv_b);  // loss = mean(fake) - mean(real)
        d_fake.fill(inv_b);
      } else {
        for (int k = 0; k < b; ++k) {
          d_real[k] = 2.0f * (s_real[static_cast<std::size_t>(k)] -
                              static_cast<float>(config.label_real)) * inv_b;
          d_fake[k] = 2.0f * (s_fake[static_cast<std::size_t>(k)] -
                              static_cast<float>(config.label_fake)) * inv_b;
        }
      }

      auto g_real = gan.critic.zero_grads();
      auto g_fake = gan.critic.zero_grads();
      gan.critic.backward(d_real, cr, g_real);
      gan.critic.backward(d_fake, cf, g_fake);
      detail::add_grads(g_real, g_fake);
      opt_c.step(nn::flat_grads(g_real));
      nn::clip_weights(gan.critic, config.clip_c);
    }

    // generator update
    {
      const nn::Tensor<float> z = detail::sample_latent<float>(z_rng, b, config.latent_dim);
      nn::ForwardCache<float> gen_cache, critic_cache;
      const nn::Tensor<float> fake = gan.generator.forward(z, nn::Mode::train, &gen_cache);
      const nn::Tensor<float> s_fake =
          gan.critic.forward(fake, nn::Mode::train, &critic_cache, /*update_stats=*/false);

      nn::Tensor<float> d_fake({b, 1});
      if (config.loss_mode == GanLossMode::wasserstein) {
        d_fake.fill(-inv_b);  // loss = -mean(fake)
      } else {
        for (int k = 0; k < b; ++k) {
          d_fake[k] = 2.0f * (s_fake[static_cast<std::size_t>(k)] -
                              static_cast<float>(config.label_real)) * inv_b;
        }
      }
      auto g_critic_scratch = gan.critic.zero_grads();
      const nn::Tensor<float> d_images =
          gan.critic.backward(d_fake, critic_cache, g_critic_scratch);
      auto g_gen = gan.generator.zero_grads();
      gan.generator.backward(d_images, gen_cache, g_gen);
      opt_g.step(nn::flat_grads(g_gen));
    }

    gan.critic_estimates.push_back(estimate);
  }
  return gan;
}

// n generated images in [0, 1], deterministic per seed.
template <typename T>
std::vector<Grid> sample_structures(TrainedGAN<T>& gan, int n, std::uint64_t seed) {
  if (n < 0) throw ParameterError("sample_structures: n must be >= 0");
  std::vector<Grid> out;
  if (n == 0) return out;
  Rng rng(Rng::derive(seed, 0x73616d70));
  const int side = gan.config.image_side;
  const std::size_t img_len = static_cast<std::size_t>(side) * side;
  int remaining = n;
  while (remaining > 0) {
    const int batch = std::min(remaining, gan.config.batch_size);
    const nn::Tensor<T> z = detail::sample_latent<T>(rng, batch, gan.config.latent_dim);
    const nn::Tensor<T> imgs = gan.generator.forward(z, nn::Mode::infer);
    for (int k = 0; k < batch; ++k) {
      Grid g(side, side);
      for (std::size_t i = 0; i < img_len; ++i)
        g[i] = static_cast<double>(imgs[k * img_len + i]);
      out.push_back(std::move(g));
    }
    remaining -= batch;
  }
  return out;
}

// Diagnostic: mean critic score of real minus fake batches (inference mode).
template <typename T>
double critic_estimate(TrainedGAN<T>& gan, const nn::Tensor<T>& real_batch,
                       const nn::Tensor<T>& fake_batch) {
  if (real_batch.numel() == 0 || fake_batch.numel() == 0)
    throw DataError("critic_estimate: empty batch");
  if (!real_batch.same_shape(fake_batch)) throw DataError("critic_estimate: shape mismatch");
  const nn::Tensor<T> sr = gan.critic.forward(real_batch, nn::Mode::infer);
  const nn::Tensor<T> sf = gan.critic.forward(fake_batch, nn::Mode::infer);
  double real = 0.0, fake = 0.0;
  for (std::size_t i = 0; i < sr.numel(); ++i) real += sr[i];
  for (std::size_t i = 0; i < sf.numel(); ++i) fake += sf[i];
  return real / static_cast<double>(sr.numel()) - fake / static_cast<double>(sf.numel());
}

}  // namespace topogen::models

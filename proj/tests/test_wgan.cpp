#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "topogen/models/wgan.hpp"

using namespace topogen;
using namespace topogen::models;

namespace {

// staged sides of the generator: collect every upsample output height
std::vector<int> upsample_sides(const nn::NetworkSpec& spec, const nn::FeatureShape& input) {
  std::vector<int> sides;
  nn::FeatureShape cur = input;
  for (const auto& layer : spec.layers) {
    cur = nn::shape_algebra::layer_out_shape(layer, cur);
    if (std::holds_alternative<nn::UpsampleSpec>(layer)) sides.push_back(cur[0]);
  }
  return sides;
}

data::Dataset flat_field_dataset(int n, int side, std::uint64_t seed) {
  data::Dataset ds;
  ds.nelx = ds.nely = side;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    data::Sample s;
    s.id = data::sample_id(i);
    const double vf = 0.3 + 0.5 * (i % 6) / 5.0;
    s.label = {vf, 3.0, 1.5};
    s.image = Grid(side, side, vf);
    for (int r = 0; r < side / 2; ++r)
      for (int c = 0; c < side; ++c) s.image.at(r, c) = std::min(1.0, vf + 0.3);
    data::quantize_f32(s.image);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

GanConfig tiny_config() {
  GanConfig c;
  c.image_side = 16;
  c.base_side = 4;
  c.base_channels = 16;
  c.generator_channels = {12, 8};
  c.critic_channels = {8, 12};
  c.batch_size = 8;
  c.generator_steps = 12;
  c.latent_dim = 16;
  return c;
}

}  // namespace

TEST_CASE("generator stages double the resolution up to the target", "[models][wgan]") {
  const GanConfig full = GanConfig::full();
  const nn::NetworkSpec g = build_generator(full, 120);
  CHECK(upsample_sides(g, {full.latent_dim}) == std::vector<int>{30, 60, 120});
  CHECK(nn::output_shape(g, {full.latent_dim}) == nn::FeatureShape{120, 120, 1});

  const GanConfig desk = GanConfig::desk();
  const nn::NetworkSpec g32 = build_generator(desk, 32);
  CHECK(upsample_sides(g32, {desk.latent_dim}) == std::vector<int>{8, 16, 32});

  CHECK_THROWS_AS(build_generator(desk, 48), SpecError);  // 48 = 3 * 2^4, base 4 unreachable
}

TEST_CASE("neither network contains pooling and the generator is deeper", "[models][wgan]") {
  for (const GanConfig& c : {GanConfig::desk(), GanConfig::full()}) {
    const nn::NetworkSpec g = build_generator(c, c.image_side);
    const nn::NetworkSpec d = build_critic(c, c.image_side);
    CHECK_FALSE(g.has_pooling());
    CHECK_FALSE(d.has_pooling());
    CHECK(g.weight_layer_count() > d.weight_layer_count());
    CHECK(nn::output_shape(d, {c.image_side, c.image_side, 1}) == nn::FeatureShape{1});
  }
  CHECK_THROWS_AS(build_critic(GanConfig::desk(), 4), SpecError);
}

TEST_CASE("a constant-weight critic scores every input identically", "[models][wgan]") {
  const GanConfig c = tiny_config();
  nn::Sequential<float> critic(build_critic(c, 16), {16, 16, 1});
  // weights stay zero; only biases and batchnorm offsets act
  nn::Tensor<float> a({1, 16, 16, 1}), b({1, 16, 16, 1});
  a.fill(0.2f);
  for (std::size_t i = 0; i < b.numel(); ++i) b[i] = static_cast<float>(i % 5) * 0.1f;
  const auto sa = critic.forward(a, nn::Mode::infer);
  const auto sb = critic.forward(b, nn::Mode::infer);
  CHECK(sa[0] == sb[0]);
}

TEST_CASE("wgan training clips the critic and is deterministic", "[models][wgan][slow]") {
  const data::Dataset ds = flat_field_dataset(12, 16, 3);
  GanConfig cfg = tiny_config();
  cfg.n_critic = 2;
  TrainedGAN<float> a = train_wgan(ds, cfg, 77);
  CHECK(a.critic_estimates.size() == static_cast<std::size_t>(cfg.generator_steps));
  CHECK(static_cast<double>(nn::max_abs_weight(a.critic)) <= cfg.clip_c + 1e-9);
  for (double e : a.critic_estimates) CHECK(std::isfinite(e));

  TrainedGAN<float> b = train_wgan(ds, cfg, 77);
  CHECK(a.critic_estimates == b.critic_estimates);

  TrainedGAN<float> c = train_wgan(ds, cfg, 78);
  CHECK(a.critic_estimates != c.critic_estimates);
}

TEST_CASE("generated samples live in [0,1] with the right shape", "[models][wgan][slow]") {
  const data::Dataset ds = flat_field_dataset(8, 16, 4);
  GanConfig cfg = tiny_config();
  cfg.generator_steps = 4;
  TrainedGAN<float> gan = train_wgan(ds, cfg, 5);

  CHECK(sample_structures(gan, 0, 1).empty());
  const auto imgs = sample_structures(gan, 10, 1);
  REQUIRE(imgs.size() == 10);
  for (const Grid& g : imgs) {
    CHECK(g.rows() == 16);
    CHECK(g.cols() == 16);
    CHECK(g.min() >= 0.0);
    CHECK(g.max() <= 1.0);
  }
  // determinism per seed
  const auto again = sample_structures(gan, 10, 1);
  for (std::size_t i = 0; i < imgs.size(); ++i) CHECK(imgs[i] == again[i]);
  const auto other = sample_structures(gan, 10, 2);
  CHECK_FALSE(imgs[0] == other[0]);
}

TEST_CASE("critic estimate is zero for identical batches and bounded by tanh",
          "[models][wgan][slow]") {
  const data::Dataset ds = flat_field_dataset(8, 16, 6);
  GanConfig cfg = tiny_config();
  cfg.generator_steps = 2;
  TrainedGAN<float> gan = train_wgan(ds, cfg, 6);

  nn::Tensor<float> batch({4, 16, 16, 1});
  Rng rng(2);
  for (std::size_t i = 0; i < batch.numel(); ++i) batch[i] = static_cast<float>(rng.uniform());
  CHECK(critic_estimate(gan, batch, batch) == 0.0);

  nn::Tensor<float> other({4, 16, 16, 1});
  for (std::size_t i = 0; i < other.numel(); ++i) other[i] = static_cast<float>(rng.uniform());
  const double est = critic_estimate(gan, batch, other);
  CHECK(est > -2.0);
  CHECK(est < 2.0);

  nn::Tensor<float> empty;
  CHECK_THROWS_AS(critic_estimate(gan, empty, empty), DataError);
}

TEST_CASE("generator collapses onto a single-image dataset", "[models][wgan][slow]") {
  // one repeated target; the generator should reproduce it closely
  data::Dataset ds;
  ds.nelx = ds.nely = 16;
  Grid target(16, 16, 0.05);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 16; ++c) target.at(r, c) = 0.95;
  for (int i = 0; i < 16; ++i) {
    data::Sample s;
    s.id = data::sample_id(i);
    s.label = {0.5, 3.0, 1.5};
    s.image = target;
    data::quantize_f32(s.image);
    ds.samples.push_back(std::move(s));
  }
  GanConfig cfg = tiny_config();
  cfg.generator_steps = 3000;
  TrainedGAN<float> gan = train_wgan(ds, cfg, 123);
  const auto samples = sample_structures(gan, 16, 99);
  double mae = 0.0;
  for (const Grid& g : samples) mae += mean_abs_diff(g, target);
  mae /= static_cast<double>(samples.size());
  CHECK(mae < 0.05);
}

TEST_CASE("smoothed-target mode trains with the +-0.9 labels", "[models][wgan][slow]") {
  const data::Dataset ds = flat_field_dataset(8, 16, 8);
  GanConfig cfg = tiny_config();
  cfg.loss_mode = GanLossMode::smoothed;
  cfg.generator_steps = 6;
  TrainedGAN<float> gan = train_wgan(ds, cfg, 9);
  CHECK(gan.critic_estimates.size() == 6);
  CHECK(static_cast<double>(nn::max_abs_weight(gan.critic)) <= cfg.clip_c + 1e-9);
}

TEST_CASE("gan bundles round-trip through checkpoints", "[models][wgan][slow]") {
  namespace fs = std::filesystem;
  const data::Dataset ds = flat_field_dataset(8, 16, 10);
  GanConfig cfg = tiny_config();
  cfg.generator_steps = 3;
  TrainedGAN<float> gan = train_wgan(ds, cfg, 11);

  const fs::path p = fs::temp_directory_path() / "topogen_gan_test.ckpt";
  gan.save(p);
  TrainedGAN<float> back = TrainedGAN<float>::load(p);
  CHECK(back.seed == 11);
  CHECK(back.critic_estimates == gan.critic_estimates);
  CHECK(back.config.image_side == 16);
  const auto a = sample_structures(gan, 3, 4);
  const auto b = sample_structures(back, 3, 4);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  fs::remove(p);
}

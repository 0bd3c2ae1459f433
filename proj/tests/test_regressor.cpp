#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "topogen/models/regressor.hpp"

using namespace topogen;
using namespace topogen::models;

TEST_CASE("full-scale regressor lands near the published parameter total", "[models][regressor]") {
  const RegressorSpec spec = build_regressor(120, RegressorProfile::full());
  const double total = static_cast<double>(spec.parameter_count());
  CHECK(std::abs(total - 1206306.0) / 1206306.0 <= 0.05);
}

TEST_CASE("desk regressor composes end to end at 32x32", "[models][regressor]") {
  const RegressorSpec spec = build_regressor(32, RegressorProfile::desk());
  const auto t = nn::output_shape(spec.trunk, spec.input);
  CHECK(t == nn::FeatureShape{4, 4, 16});
  CHECK(nn::output_shape(spec.head_vol_frac, t) == nn::FeatureShape{1});
  const auto e1 = nn::output_shape(spec.ext1, t);
  CHECK(nn::output_shape(spec.head_penal, e1) == nn::FeatureShape{1});
  const auto e2 = nn::output_shape(spec.ext2, e1);
  CHECK(nn::output_shape(spec.head_r_min, e2) == nn::FeatureShape{1});

  // branch depth ordering: vol_frac earliest, then penal, then r_min
  const std::size_t depth_vf = spec.trunk.layers.size();
  const std::size_t depth_penal = depth_vf + spec.ext1.layers.size();
  const std::size_t depth_rmin = depth_penal + spec.ext2.layers.size();
  CHECK(depth_vf < depth_penal);
  CHECK(depth_penal < depth_rmin);
}

TEST_CASE("regressor rejects unsupported input sides", "[models][regressor]") {
  CHECK_THROWS_AS(build_regressor(30, RegressorProfile::desk()), SpecError);
  CHECK_THROWS_AS(build_regressor(16, RegressorProfile::desk()), SpecError);
}

namespace {

data::Dataset synthetic_dataset(int n, int side, std::uint64_t seed) {
  // graded-density images whose labels follow simple visual rules; enough
  // signal for smoke training without running the optimizer
  data::Dataset ds;
  ds.nelx = ds.nely = side;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double vf = 0.3 + 0.5 * (i % 7) / 6.0;
    data::Sample s;
    s.id = data::sample_id(i);
    s.label = {vf, 2.0 + (i % 5) * 0.5, 1.5 + (i % 3) * 0.75};
    s.image = Grid(side, side);
    for (std::size_t px = 0; px < s.image.size(); ++px)
      s.image[px] = std::min(1.0, std::max(0.0, vf + 0.08 * rng.normal()));
    data::quantize_f32(s.image);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace

TEST_CASE("regressor memorizes a single sample", "[models][regressor][slow]") {
  data::Dataset ds = synthetic_dataset(1, 32, 21);
  RegressorHyper hyper;
  hyper.epochs = 300;
  hyper.batch_size = 1;
  hyper.val_fraction = 0.0;
  hyper.seed = 5;
  const RegressorTrainResult r = train_regressor(ds, 32, RegressorProfile::desk(), hyper);
  REQUIRE_FALSE(r.log.rows.empty());
  CHECK(r.log.rows.back()[1] < 1e-4);  // summed train MSE
}

TEST_CASE("training runs deterministically and predictions are stable",
          "[models][regressor][slow]") {
  data::Dataset ds = synthetic_dataset(20, 32, 22);
  RegressorHyper hyper;
  hyper.epochs = 5;
  hyper.batch_size = 8;
  hyper.seed = 9;
  RegressorTrainResult a = train_regressor(ds, 32, RegressorProfile::desk(), hyper);
  RegressorTrainResult b = train_regressor(ds, 32, RegressorProfile::desk(), hyper);
  CHECK(a.log.rows.back()[1] == b.log.rows.back()[1]);

  const Grid img = resample_area(ds.samples[3].image, 32, 32);
  const RegressorPrediction p1 = a.model.predict(img);
  const RegressorPrediction p2 = a.model.predict(img);
  CHECK(p1.vol_frac == p2.vol_frac);
  CHECK(p1.penal == p2.penal);
  CHECK(p1.r_min == p2.r_min);
  CHECK(std::isfinite(p1.vol_frac));
  CHECK(std::isfinite(p1.penal));
  CHECK(std::isfinite(p1.r_min));

  Grid wrong(16, 16, 0.5);
  CHECK_THROWS_AS(a.model.predict(wrong), DataError);
}

TEST_CASE("shuffled labels cannot beat the variance baseline", "[models][regressor][slow]") {
  data::Dataset ds = synthetic_dataset(24, 32, 23);
  // destroy the image-label relationship
  Rng rng(31);
  std::vector<data::DesignParams> labels;
  for (const auto& s : ds.samples) labels.push_back(s.label);
  rng.shuffle(labels.begin(), labels.end());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) ds.samples[i].label = labels[i];

  RegressorHyper hyper;
  hyper.epochs = 40;
  hyper.batch_size = 8;
  hyper.val_fraction = 0.2;
  hyper.seed = 13;
  const RegressorTrainResult r = train_regressor(ds, 32, RegressorProfile::desk(), hyper);

  // variance baseline: predict the training-fold mean for every head
  double base = 0.0;
  {
    for (std::size_t i : r.split.val) {
      const auto& l = ds.samples[i].label;
      const double zv = (l.vol_frac - r.model.vol_frac_mean) / r.model.vol_frac_std;
      const double zp = (l.penal - r.model.penal_mean) / r.model.penal_std;
      const double zr = (l.r_min - r.model.r_min_mean) / r.model.r_min_std;
      base += zv * zv + zp * zp + zr * zr;
    }
    base /= static_cast<double>(r.split.val.size());
  }
  CHECK(r.log.rows.back()[2] >= base);  // val MSE shows no real signal
}

TEST_CASE("regressor checkpoints restore the full model", "[models][regressor]") {
  namespace fs = std::filesystem;
  data::Dataset ds = synthetic_dataset(4, 32, 25);
  RegressorHyper hyper;
  hyper.epochs = 2;
  hyper.batch_size = 2;
  hyper.val_fraction = 0.0;
  RegressorTrainResult r = train_regressor(ds, 32, RegressorProfile::desk(), hyper);

  const fs::path p = fs::temp_directory_path() / "topogen_regressor_test.ckpt";
  r.model.save(p);
  RegressorModel<float> back = RegressorModel<float>::load(p);
  CHECK(back.input_side == 32);
  CHECK(back.profile_name == "desk");
  CHECK(back.penal_mean == r.model.penal_mean);

  const Grid img = resample_area(ds.samples[0].image, 32, 32);
  const RegressorPrediction a = r.model.predict(img);
  const RegressorPrediction b = back.predict(img);
  CHECK(a.vol_frac == b.vol_frac);
  CHECK(a.penal == b.penal);
  CHECK(a.r_min == b.r_min);
  fs::remove(p);
}

TEST_CASE("non-finite labels are rejected", "[models][regressor]") {
  data::Dataset ds = synthetic_dataset(2, 32, 27);
  ds.samples[1].label.penal = std::nan("");
  RegressorHyper hyper;
  CHECK_THROWS_AS(train_regressor(ds, 32, RegressorProfile::desk(), hyper), DataError);
}

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "topogen/data/dataset.hpp"

using namespace topogen;
using namespace topogen::data;

TEST_CASE("parameter grid matches the published sweep size", "[data]") {
  ParamBounds b;  // defaults: 14 x 12 x 18
  const auto grid = parameter_grid(b);
  CHECK(grid.size() == 3024);
  CHECK(grid.front().vol_frac == Catch::Approx(0.3));
  CHECK(grid.front().penal == Catch::Approx(2.0));
  CHECK(grid.front().r_min == Catch::Approx(1.5));
  CHECK(grid.back().vol_frac == Catch::Approx(0.8));
  CHECK(grid.back().penal == Catch::Approx(4.0));
  CHECK(grid.back().r_min == Catch::Approx(3.0));
  for (const auto& p : grid) {
    CHECK(p.vol_frac >= 0.3);
    CHECK(p.vol_frac <= 0.8);
    CHECK(p.penal >= 2.0);
    CHECK(p.penal <= 4.0);
    CHECK(p.r_min >= 1.5);
    CHECK(p.r_min <= 3.0);
  }
}

TEST_CASE("2x2x2 grid enumerates the corner box lexicographically", "[data]") {
  ParamBounds b;
  b.vol_frac_count = b.penal_count = b.r_min_count = 2;
  const auto grid = parameter_grid(b);
  REQUIRE(grid.size() == 8);
  CHECK(grid[0] == DesignParams{0.3, 2.0, 1.5});
  CHECK(grid[1] == DesignParams{0.3, 2.0, 3.0});  // r_min innermost
  CHECK(grid[2] == DesignParams{0.3, 4.0, 1.5});
  CHECK(grid[7] == DesignParams{0.8, 4.0, 3.0});
}

TEST_CASE("degenerate axis counts are rejected", "[data]") {
  ParamBounds b;
  b.vol_frac_count = 1;
  CHECK_THROWS_AS(parameter_grid(b), ParameterError);
  b.vol_frac_count = 2;
  b.r_min_count = 0;
  CHECK_THROWS_AS(parameter_grid(b), ParameterError);
}

namespace {

Dataset small_dataset(int triples = 2) {
  simp::Mesh mesh(16, 10);
  ParamBounds b;
  b.vol_frac_count = b.penal_count = b.r_min_count = 2;
  auto grid = parameter_grid(b);
  grid.resize(static_cast<std::size_t>(triples));
  Dataset ds = generate_dataset(grid, mesh, simp::cantilever_mid_load(mesh), {}, 1);
  ds.bounds = b;
  return ds;
}

}  // namespace

TEST_CASE("generated samples hold the volume constraint in their mean", "[data]") {
  simp::Mesh mesh(20, 12);
  const std::vector<DesignParams> grid{{0.5, 3.0, 1.5}};
  const Dataset ds = generate_dataset(grid, mesh, simp::cantilever_mid_load(mesh), {}, 1);
  REQUIRE(ds.samples.size() == 1);
  CHECK(ds.failed_runs == 0);
  const Sample& s = ds.samples[0];
  CHECK_FALSE(s.augmented);
  CHECK(std::abs(s.image.mean() - 0.5) <= 1e-3);
  CHECK(s.image.rows() == 12);
  CHECK(s.image.cols() == 20);
  CHECK(s.label == grid[0]);
}

TEST_CASE("generation is independent of the job count", "[data]") {
  simp::Mesh mesh(12, 8);
  ParamBounds b;
  b.vol_frac_count = b.penal_count = b.r_min_count = 2;
  auto grid = parameter_grid(b);
  grid.resize(4);
  const Dataset seq = generate_dataset(grid, mesh, simp::cantilever_mid_load(mesh), {}, 1);
  const Dataset par = generate_dataset(grid, mesh, simp::cantilever_mid_load(mesh), {}, 2);
  CHECK(seq.content_hash() == par.content_hash());
}

TEST_CASE("empty grids are rejected", "[data]") {
  simp::Mesh mesh(4, 4);
  CHECK_THROWS_AS(generate_dataset({}, mesh, simp::cantilever_mid_load(mesh)), ParameterError);
}

TEST_CASE("augmentation doubles the dataset and preserves labels", "[data]") {
  const Dataset ds = small_dataset(2);
  const Dataset aug = augment(ds, 0.05, 0.2, 42);
  REQUIRE(aug.samples.size() == 4);
  for (std::size_t i = 0; i < 2; ++i) {
    const Sample& orig = aug.samples[i];
    const Sample& copy = aug.samples[i + 2];
    CHECK_FALSE(orig.augmented);
    CHECK(copy.augmented);
    CHECK(copy.label == orig.label);
    CHECK(copy.id == orig.id + "-aug");
    CHECK(copy.image.min() >= 0.0);
    CHECK(copy.image.max() <= 1.0);
    CHECK(mean_abs_diff(copy.image, orig.image) > 0.0);  // noise actually landed
  }
}

TEST_CASE("zero-magnitude augmentation copies bit-exactly", "[data]") {
  const Dataset ds = small_dataset(1);
  const Dataset aug = augment(ds, 0.05, 0.0, 7);
  REQUIRE(aug.samples.size() == 2);
  CHECK(aug.samples[1].image == aug.samples[0].image);
}

TEST_CASE("augmentation is deterministic per seed", "[data]") {
  const Dataset ds = small_dataset(2);
  CHECK(augment(ds, 0.02, 0.2, 9).content_hash() == augment(ds, 0.02, 0.2, 9).content_hash());
  CHECK(augment(ds, 0.02, 0.2, 9).content_hash() != augment(ds, 0.02, 0.2, 10).content_hash());
  CHECK_THROWS_AS(augment(ds, 0.0, 0.2, 9), ParameterError);
  CHECK_THROWS_AS(augment(ds, 0.5, std::nan(""), 9), ParameterError);
}

TEST_CASE("dataset round-trips through its on-disk layout", "[data]") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "topogen_ds_roundtrip";
  fs::remove_all(dir);

  Dataset ds = augment(small_dataset(2), 0.05, 0.2, 5);
  write_dataset(ds, dir);
  const Dataset back = read_dataset(dir);
  REQUIRE(back.samples.size() == ds.samples.size());
  CHECK(back.content_hash() == ds.content_hash());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(back.samples[i].image == ds.samples[i].image);
    CHECK(back.samples[i].label == ds.samples[i].label);
    CHECK(back.samples[i].id == ds.samples[i].id);
  }
  fs::remove_all(dir);
}

TEST_CASE("corrupt on-disk datasets are rejected", "[data]") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "topogen_ds_corrupt";
  fs::remove_all(dir);
  Dataset ds = small_dataset(2);
  write_dataset(ds, dir);

  SECTION("truncated image file") {
    const fs::path img = dir / "images" / (ds.samples[0].id + ".topo");
    std::string bytes = read_file(img);
    write_file(img, bytes.substr(0, bytes.size() - 2));
    CHECK_THROWS_AS(read_dataset(dir), IntegrityError);
  }
  SECTION("manifest count mismatch") {
    std::string manifest = read_file(dir / "manifest.jsonl");
    const auto nl = manifest.find('\n');
    auto header = nlohmann::json::parse(manifest.substr(0, nl));
    header["sample_count"] = 99;
    write_file(dir / "manifest.jsonl", header.dump() + manifest.substr(nl));
    CHECK_THROWS_AS(read_dataset(dir), IntegrityError);
  }
  SECTION("tampered pixel breaks the content hash") {
    const fs::path img = dir / "images" / (ds.samples[0].id + ".topo");
    std::string bytes = read_file(img);
    bytes[20] = static_cast<char>(bytes[20] ^ 0x40);
    write_file(img, bytes);
    CHECK_THROWS_AS(read_dataset(dir), IntegrityError);
  }
  fs::remove_all(dir);
}

TEST_CASE("splits keep augmented copies with their originals", "[data]") {
  Dataset ds = augment(small_dataset(4), 0.05, 0.2, 3);
  REQUIRE(ds.samples.size() == 8);
  const SplitIndices split = split_dataset(ds, 0.25, 11);
  CHECK(split.train.size() + split.val.size() == 8);
  CHECK(split.val.size() == 2);  // one group of two
  auto fold_of = [&](const std::string& base) {
    int fold = -1;
    for (std::size_t i : split.train) {
      if (ds.samples[i].id.rfind(base, 0) == 0) fold = 0;
    }
    for (std::size_t i : split.val) {
      if (ds.samples[i].id.rfind(base, 0) == 0) {
        if (fold == 0) return -2;  // group straddles folds
        fold = 1;
      }
    }
    return fold;
  };
  for (int g = 0; g < 4; ++g) {
    const int fold = fold_of(sample_id(g));
    CHECK(fold >= 0);
  }
  // determinism
  const SplitIndices again = split_dataset(ds, 0.25, 11);
  CHECK(again.train == split.train);
  CHECK(again.val == split.val);
}

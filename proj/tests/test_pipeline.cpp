#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "topogen/pipeline/stages.hpp"

using namespace topogen;
using namespace topogen::pipeline;
namespace fs = std::filesystem;

TEST_CASE("iou on hand-counted cases", "[pipeline]") {
  Grid a(3, 3, 0.0), b(3, 3, 0.0);
  // a: 4 material pixels, b: 2 of them plus 2 elsewhere -> 2 overlap, 6 union
  a.at(0, 0) = a.at(0, 1) = a.at(1, 0) = a.at(1, 1) = 1.0;
  b.at(0, 0) = b.at(0, 1) = b.at(2, 2) = b.at(2, 1) = 1.0;
  CHECK(iou(a, b) == Catch::Approx(2.0 / 6.0));
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, b) == iou(b, a));

  Grid left(2, 2, 0.0), right(2, 2, 0.0);
  left.at(0, 0) = left.at(1, 0) = 1.0;
  right.at(0, 1) = right.at(1, 1) = 1.0;
  CHECK(iou(left, right) == 0.0);

  CHECK(iou(Grid(2, 2, 0.0), Grid(2, 2, 0.0)) == 1.0);  // both empty

  Grid gray(2, 2, 0.5);
  CHECK_THROWS_AS(iou(gray, right), DataError);
  CHECK_THROWS_AS(iou(Grid(2, 3, 0.0), right), DataError);
}

TEST_CASE("run config parses, merges, and serializes", "[pipeline]") {
  const RunConfig cfg = RunConfig::parse(
      "# comment line\n"
      "nelx = 60\n"
      "volfrac=0.5\n"
      "label = desk run # trailing comment\n"
      "\n");
  CHECK(cfg.integer("nelx") == 60);
  CHECK(cfg.num("volfrac") == 0.5);
  CHECK(cfg.str("label") == "desk run");
  CHECK_FALSE(cfg.has("missing"));
  CHECK(cfg.num("missing", 2.5) == 2.5);
  CHECK_THROWS_AS(cfg.str("missing"), ParameterError);
  CHECK_THROWS_AS(cfg.num("label"), ParameterError);
  CHECK_THROWS_AS(RunConfig::parse("no equals sign"), ParameterError);

  RunConfig overrides;
  overrides.set("nelx", 80);
  RunConfig merged = cfg;
  merged.merge_overrides(overrides);
  CHECK(merged.integer("nelx") == 80);
  CHECK(merged.num("volfrac") == 0.5);

  const RunConfig back = RunConfig::parse(merged.serialize());
  CHECK(back.integer("nelx") == 80);
  CHECK(back.str("label") == "desk run");
  const RunConfig from_j = RunConfig::from_json(merged.to_json());
  CHECK(from_j.serialize() == merged.serialize());
}

TEST_CASE("simp stage writes artifact, manifest, and replays bit-exactly", "[pipeline]") {
  const fs::path dir = fs::temp_directory_path() / "topogen_stage_simp";
  fs::remove_all(dir);
  fs::create_directories(dir);

  RunConfig cfg;
  cfg.set("nelx", 16);
  cfg.set("nely", 10);
  cfg.set("volfrac", 0.5);
  cfg.set("penal", 3.0);
  cfg.set("rmin", 1.5);
  cfg.set("out", (dir / "a.topo").string());
  const StageResult first = stage_simp(cfg);

  CHECK(fs::exists(dir / "a.topo"));
  CHECK(fs::exists(dir / "a.topo.manifest.json"));
  CHECK(first.output_hash == sha256_hex(read_file(dir / "a.topo")));

  const auto manifest = nlohmann::json::parse(read_file(dir / "a.topo.manifest.json"));
  CHECK(manifest.at("stage") == "simp");
  CHECK(manifest.at("output_hash") == first.output_hash);
  const StageResult replay = replay_stage(manifest, dir / "b.topo");
  CHECK(replay.output_hash == first.output_hash);
  CHECK(read_file(dir / "b.topo") == read_file(dir / "a.topo"));
  fs::remove_all(dir);
}

TEST_CASE("dataset stage replays to the same content hash", "[pipeline][slow]") {
  const fs::path dir = fs::temp_directory_path() / "topogen_stage_ds";
  fs::remove_all(dir);

  RunConfig cfg;
  cfg.set("counts", std::string("2,2,2"));
  cfg.set("nelx", 12);
  cfg.set("nely", 8);
  cfg.set("augment", true);
  cfg.set("seed", std::uint64_t{7});
  cfg.set("jobs", 2);
  cfg.set("out", (dir / "ds").string());
  const StageResult first = stage_dataset(cfg);
  CHECK(first.manifest.at("sample_count") == 16);

  const auto manifest = nlohmann::json::parse(read_file(dir / "ds" / "stage_manifest.json"));
  const StageResult replay = replay_stage(manifest, dir / "ds2");
  CHECK(replay.output_hash == first.output_hash);

  // the replayed directory holds a byte-identical dataset manifest
  CHECK(read_file(dir / "ds2" / "manifest.jsonl") == read_file(dir / "ds" / "manifest.jsonl"));
  fs::remove_all(dir);
}

TEST_CASE("validate stage produces a populated report", "[pipeline][slow]") {
  const fs::path dir = fs::temp_directory_path() / "topogen_stage_val";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // small dataset and a briefly trained model
  RunConfig dcfg;
  dcfg.set("counts", std::string("2,2,2"));
  dcfg.set("nelx", 16);
  dcfg.set("nely", 16);
  dcfg.set("seed", std::uint64_t{3});
  dcfg.set("out", (dir / "ds").string());
  stage_dataset(dcfg);

  RunConfig tcfg;
  tcfg.set("data", (dir / "ds").string());
  tcfg.set("profile", std::string("desk"));
  tcfg.set("epochs", 2);
  tcfg.set("batch", 4);
  tcfg.set("val_fraction", 0.0);
  tcfg.set("seed", std::uint64_t{4});
  tcfg.set("out", (dir / "reg.ckpt").string());
  stage_train_regressor(tcfg);

  RunConfig vcfg;
  vcfg.set("image", (dir / "ds" / "images" / "s00000.topo").string());
  vcfg.set("model", (dir / "reg.ckpt").string());
  vcfg.set("nelx", 16);
  vcfg.set("nely", 16);
  vcfg.set("out", (dir / "report.jsonl").string());
  const StageResult vr = stage_validate(vcfg);

  const auto record = nlohmann::json::parse(read_file(dir / "report.jsonl"));
  CHECK(record.at("simp_failed") == false);
  const double iou_v = record.at("iou");
  CHECK(iou_v >= 0.0);
  CHECK(iou_v <= 1.0);
  const double mae = record.at("pixel_mae");
  CHECK(mae >= 0.0);
  CHECK(mae <= 1.0);
  CHECK(record.at("rerun_compliance").get<double>() >= 0.0);
  CHECK(record.at("timings").at("simp_s").get<double>() > 0.0);
  // rerun params are clamped into the training bounds
  const auto rp = record.at("rerun_params");
  CHECK(rp.at("vol_frac").get<double>() >= 0.3);
  CHECK(rp.at("vol_frac").get<double>() <= 0.8);

  // deterministic replay of the validate stage
  const StageResult replay = replay_stage(vr.manifest, dir / "report2.jsonl");
  CHECK(replay.output_hash == vr.output_hash);
  fs::remove_all(dir);
}

TEST_CASE("blank input still validates against clamped predictions", "[pipeline][slow]") {
  const fs::path dir = fs::temp_directory_path() / "topogen_stage_blank";
  fs::remove_all(dir);
  fs::create_directories(dir);

  RunConfig dcfg;
  dcfg.set("counts", std::string("2,2,2"));
  dcfg.set("nelx", 16);
  dcfg.set("nely", 16);
  dcfg.set("seed", std::uint64_t{5});
  dcfg.set("out", (dir / "ds").string());
  stage_dataset(dcfg);

  RunConfig tcfg;
  tcfg.set("data", (dir / "ds").string());
  tcfg.set("epochs", 1);
  tcfg.set("batch", 4);
  tcfg.set("val_fraction", 0.0);
  tcfg.set("out", (dir / "reg.ckpt").string());
  stage_train_regressor(tcfg);

  auto model = models::RegressorModel<float>::load(dir / "reg.ckpt");
  ValidateOptions opt;
  opt.mesh = simp::Mesh(16, 16);
  const ValidationReport rep = validate_sample(Grid(16, 16, 0.0), model, opt);
  CHECK_FALSE(rep.simp_failed);
  CHECK(rep.iou_value >= 0.0);
  CHECK(rep.iou_value <= 1.0);
  CHECK(rep.rerun_params.vol_frac >= 0.3);
  fs::remove_all(dir);
}

TEST_CASE("triptych stitches three panels at matched height", "[pipeline]") {
  Grid gen(16, 16, 0.2), rerun(16, 16, 0.9);
  const Grid panel = triptych(gen, {0.512, 3.25, 1.75}, rerun);
  CHECK(panel.rows() >= 16);
  CHECK(panel.cols() > 2 * 16);
  CHECK(panel.min() >= 0.0);
  CHECK(panel.max() <= 1.0);
}

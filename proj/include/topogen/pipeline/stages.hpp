#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "topogen/core/hash.hpp"
#include "topogen/core/io.hpp"
#include "topogen/data/dataset.hpp"
#include "topogen/models/regressor.hpp"
#include "topogen/models/wgan.hpp"
#include "topogen/pipeline/runconfig.hpp"
#include "topogen/pipeline/validate.hpp"
#include "topogen/post/postproc.hpp"
#include "topogen/simp/optimize.hpp"

namespace topogen::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// Every stage runs from a RunConfig, writes its artifact plus a manifest
// carrying the full config and the artifact's content hash, and returns
// both. Replaying a manifest (with only the output destination swapped)
// must reproduce the hash bit-exactly; output paths are therefore excluded
// from anything embedded inside the artifacts themselves.
struct StageResult {
  std::string output_hash;
  json manifest;
};

namespace detail {

inline json make_manifest(const std::string& stage, const RunConfig& cfg,
                          const std::string& output_hash) {
  json m;
  m["stage"] = stage;
  m["config"] = cfg.to_json();
  m["output_hash"] = output_hash;
  return m;
}

// config as embedded in artifacts: strip destination keys so the bytes do
// not depend on where the artifact lands
inline RunConfig portable(const RunConfig& cfg) {
  return cfg.without("out").without("log").without("pgm").without("jobs");
}

inline simp::SimpSettings simp_settings_from(const RunConfig& cfg) {
  simp::SimpSettings s;
  s.vol_frac = cfg.num("volfrac", s.vol_frac);
  s.penal = cfg.num("penal", s.penal);
  s.r_min = cfg.num("rmin", s.r_min);
  s.x_min = cfg.num("xmin", s.x_min);
  s.max_iters = cfg.integer("max_iters", s.max_iters);
  s.change_tol = cfg.num("tol", s.change_tol);
  return s;
}

}  // namespace detail

// One optimizer run; writes <out> (.topo) and optional <out>.pgm preview.
inline StageResult stage_simp(const RunConfig& cfg) {
  const simp::Mesh mesh(cfg.integer("nelx", 120), cfg.integer("nely", 120));
  const simp::SimpSettings settings = detail::simp_settings_from(cfg);
  const simp::OptimizationResult result =
      simp::optimize(settings, mesh, simp::cantilever_mid_load(mesh));

  Grid image = result.density;
  data::quantize_f32(image);
  const std::string bytes = encode_topo(image);
  const fs::path out = cfg.str("out");
  write_file(out, bytes);
  if (cfg.flag("pgm", false)) write_pgm(fs::path(out).replace_extension(".pgm"), image);

  StageResult sr;
  sr.output_hash = sha256_hex(bytes);
  sr.manifest = detail::make_manifest("simp", cfg, sr.output_hash);
  sr.manifest["iterations"] = result.iterations;
  sr.manifest["converged"] = result.converged;
  sr.manifest["compliance_initial"] = result.compliance_history.front();
  sr.manifest["compliance_final"] = result.compliance_history.back();
  write_file(out.string() + ".manifest.json", sr.manifest.dump(2) + "\n");
  return sr;
}

// Parameter sweep -> optimizer runs -> (optionally) augmentation -> on-disk
// dataset under <out>/.
inline StageResult stage_dataset(const RunConfig& cfg) {
  data::ParamBounds bounds;
  if (cfg.has("counts")) {
    const std::string counts = cfg.str("counts");
    int a = 0, b = 0, c = 0;
    if (std::sscanf(counts.c_str(), "%d,%d,%d", &a, &b, &c) != 3)
      throw ParameterError("dataset: counts must be 'a,b,c'");
    bounds.vol_frac_count = a;
    bounds.penal_count = b;
    bounds.r_min_count = c;
  }
  bounds.vol_frac_lo = cfg.num("vf_lo", bounds.vol_frac_lo);
  bounds.vol_frac_hi = cfg.num("vf_hi", bounds.vol_frac_hi);
  bounds.penal_lo = cfg.num("penal_lo", bounds.penal_lo);
  bounds.penal_hi = cfg.num("penal_hi", bounds.penal_hi);
  bounds.r_min_lo = cfg.num("rmin_lo", bounds.r_min_lo);
  bounds.r_min_hi = cfg.num("rmin_hi", bounds.r_min_hi);

  const simp::Mesh mesh(cfg.integer("nelx", 120), cfg.integer("nely", 120));
  const auto grid = data::parameter_grid(bounds);
  data::Dataset ds = data::generate_dataset(grid, mesh, simp::cantilever_mid_load(mesh),
                                            detail::simp_settings_from(cfg),
                                            cfg.integer("jobs", 0));
  ds.bounds = bounds;
  const std::uint64_t seed = cfg.u64("seed", 0);
  if (cfg.flag("augment", false)) {
    ds = data::augment(ds, cfg.num("noise_fraction", 0.01), cfg.num("noise_magnitude", 0.2),
                       seed);
  } else {
    ds.seed = seed;
  }

  const fs::path out = cfg.str("out");
  data::write_dataset(ds, out);
  if (cfg.flag("pgm", false)) {
    for (const auto& s : ds.samples) write_pgm(out / "previews" / (s.id + ".pgm"), s.image);
  }

  StageResult sr;
  sr.output_hash = ds.content_hash();
  sr.manifest = detail::make_manifest("dataset", cfg, sr.output_hash);
  sr.manifest["sample_count"] = ds.samples.size();
  sr.manifest["failed_runs"] = ds.failed_runs;
  write_file(out / "stage_manifest.json", sr.manifest.dump(2) + "\n");
  return sr;
}

inline StageResult stage_train_regressor(const RunConfig& cfg) {
  const data::Dataset ds = data::read_dataset(cfg.str("data"));
  const models::RegressorProfile profile =
      models::RegressorProfile::named(cfg.str("profile", "desk"));
  models::RegressorHyper hyper;
  hyper.epochs = cfg.integer("epochs", hyper.epochs);
  hyper.batch_size = cfg.integer("batch", hyper.batch_size);
  hyper.learning_rate = cfg.num("lr", hyper.learning_rate);
  hyper.val_fraction = cfg.num("val_fraction", hyper.val_fraction);
  hyper.seed = cfg.u64("seed", 1);
  const int side = cfg.integer("input_side", profile.name == "full" ? 120 : 32);

  models::RegressorTrainResult result = models::train_regressor(ds, side, profile, hyper);

  json train_meta;
  train_meta["config"] = detail::portable(cfg).to_json();
  train_meta["dataset_hash"] = ds.content_hash();
  train_meta["val"] = {{"mae_vol_frac", result.val.mae_vol_frac},
                       {"mae_penal", result.val.mae_penal},
                       {"mae_r_min", result.val.mae_r_min},
                       {"baseline_penal", result.val.baseline_penal},
                       {"baseline_r_min", result.val.baseline_r_min},
                       {"baseline_mean_pixel_vol_frac", result.val.baseline_mean_pixel_vol_frac},
                       {"count", result.val.count}};
  const fs::path out = cfg.str("out");
  result.model.save(out, train_meta);
  if (cfg.has("log")) result.log.save(cfg.str("log"));

  StageResult sr;
  sr.output_hash = sha256_hex(read_file(out));
  sr.manifest = detail::make_manifest("train-regressor", cfg, sr.output_hash);
  sr.manifest["val"] = train_meta["val"];
  write_file(out.string() + ".manifest.json", sr.manifest.dump(2) + "\n");
  return sr;
}

inline StageResult stage_train_gan(const RunConfig& cfg) {
  const data::Dataset ds = data::read_dataset(cfg.str("data"));
  models::GanConfig gan_cfg = models::GanConfig::named(cfg.str("profile", "desk"));
  gan_cfg.generator_steps = cfg.integer("steps", gan_cfg.generator_steps);
  gan_cfg.batch_size = cfg.integer("batch", gan_cfg.batch_size);
  gan_cfg.n_critic = cfg.integer("n_critic", gan_cfg.n_critic);
  gan_cfg.clip_c = cfg.num("clip", gan_cfg.clip_c);
  gan_cfg.critic_lr = cfg.num("critic_lr", gan_cfg.critic_lr);
  gan_cfg.generator_lr = cfg.num("generator_lr", gan_cfg.generator_lr);
  if (cfg.has("loss_mode")) {
    gan_cfg.loss_mode = cfg.str("loss_mode") == "smoothed" ? models::GanLossMode::smoothed
                                                           : models::GanLossMode::wasserstein;
  }
  gan_cfg.critic_batchnorm = cfg.flag("critic_bn", gan_cfg.critic_batchnorm);
  const std::uint64_t seed = cfg.u64("seed", 1);

  const fs::path out = cfg.str("out");
  models::TrainedGAN<float> gan =
      models::train_wgan(ds, gan_cfg, seed, fs::path(out.string() + ".lastgood"));

  StageResult sr;
  gan.save(out);
  sr.output_hash = sha256_hex(read_file(out));
  sr.manifest = detail::make_manifest("train-gan", cfg, sr.output_hash);
  sr.manifest["dataset_hash"] = ds.content_hash();
  write_file(out.string() + ".manifest.json", sr.manifest.dump(2) + "\n");
  if (cfg.has("log")) {
    nn::TrainingLog log;
    log.columns = {"step", "critic_estimate"};
    for (std::size_t i = 0; i < gan.critic_estimates.size(); ++i)
      log.add_row({static_cast<double>(i), gan.critic_estimates[i]});
    log.save(cfg.str("log"));
  }
  return sr;
}

// Sample n structures from a trained generator into <out>/.
inline StageResult stage_generate(const RunConfig& cfg) {
  models::TrainedGAN<float> gan = models::TrainedGAN<float>::load(cfg.str("gan"));
  const int n = cfg.integer("n", 64);
  const std::uint64_t seed = cfg.u64("seed", 1);
  const auto images = models::sample_structures(gan, n, seed);

  const fs::path out = cfg.str("out");
  fs::create_directories(out);
  Sha256 h;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string name = "gen" + std::to_string(i);
    const std::string bytes = encode_topo(images[i]);
    h.update(bytes);
    write_file(out / (name + ".topo"), bytes);
    if (cfg.flag("pgm", true)) write_pgm(out / (name + ".pgm"), images[i]);
  }

  StageResult sr;
  sr.output_hash = h.hex_digest();
  sr.manifest = detail::make_manifest("generate", cfg, sr.output_hash);
  sr.manifest["count"] = images.size();
  write_file(out / "stage_manifest.json", sr.manifest.dump(2) + "\n");
  return sr;
}

inline StageResult stage_postprocess(const RunConfig& cfg) {
  const Grid image = read_topo(cfg.str("in"));
  post::PostprocConfig pc;
  pc.threshold = cfg.num("threshold", pc.threshold);
  pc.kernel_size = cfg.integer("kernel", pc.kernel_size);
  pc.sigma = cfg.num("sigma", pc.sigma);
  Grid out_img = post::postprocess(image, pc);
  data::quantize_f32(out_img);

  const std::string bytes = encode_topo(out_img);
  const fs::path out = cfg.str("out");
  write_file(out, bytes);
  if (cfg.flag("pgm", false)) write_pgm(fs::path(out).replace_extension(".pgm"), out_img);

  StageResult sr;
  sr.output_hash = sha256_hex(bytes);
  sr.manifest = detail::make_manifest("postprocess", cfg, sr.output_hash);
  write_file(out.string() + ".manifest.json", sr.manifest.dump(2) + "\n");
  return sr;
}

namespace detail {

inline ValidateOptions validate_options_from(const RunConfig& cfg) {
  ValidateOptions opt;
  opt.mesh = simp::Mesh(cfg.integer("nelx", 60), cfg.integer("nely", 60));
  opt.base_settings.x_min = cfg.num("xmin", opt.base_settings.x_min);
  opt.base_settings.max_iters = cfg.integer("max_iters", opt.base_settings.max_iters);
  opt.base_settings.change_tol = cfg.num("tol", opt.base_settings.change_tol);
  opt.compare_threshold = cfg.num("threshold", opt.compare_threshold);
  return opt;
}

}  // namespace detail

// Validate one stored structure image against its regressor-predicted
// parameters; writes a single-record JSONL report.
inline StageResult stage_validate(const RunConfig& cfg) {
  const Grid image = read_topo(cfg.str("image"));
  models::RegressorModel<float> model = models::RegressorModel<float>::load(cfg.str("model"));
  const ValidateOptions opt = detail::validate_options_from(cfg);
  const ValidationReport rep = validate_sample(image, model, opt);

  json record = rep.to_json(true);
  record["image"] = cfg.str("image");
  const fs::path out = cfg.str("out");
  write_file(out, record.dump() + "\n");

  StageResult sr;
  sr.output_hash = sha256_hex(rep.to_json(false).dump());
  sr.manifest = detail::make_manifest("validate", cfg, sr.output_hash);
  write_file(out.string() + ".manifest.json", sr.manifest.dump(2) + "\n");
  return sr;
}

// Table-style report: sample n structures from the generator, validate each,
// and emit JSONL records plus [generated | params | rerun] PGM panels.
inline StageResult stage_report(const RunConfig& cfg) {
  models::TrainedGAN<float> gan = models::TrainedGAN<float>::load(cfg.str("gan"));
  models::RegressorModel<float> model = models::RegressorModel<float>::load(cfg.str("model"));
  const int n = cfg.integer("n", 4);
  const std::uint64_t seed = cfg.u64("seed", 1);
  const ValidateOptions opt = detail::validate_options_from(cfg);

  const fs::path out = cfg.str("out");
  fs::create_directories(out);
  const auto images = models::sample_structures(gan, n, seed);

  std::string records;
  Sha256 h;
  for (std::size_t i = 0; i < images.size(); ++i) {
    Grid cleaned = post::postprocess(images[i], {});
    Grid rerun_density;
    const ValidationReport rep = validate_sample(images[i], model, opt, &rerun_density);
    json record = rep.to_json(true);
    record["index"] = i;
    records += record.dump() + "\n";
    h.update(rep.to_json(false).dump());

    write_pgm(out / ("sample" + std::to_string(i) + ".pgm"), images[i]);
    write_pgm(out / ("sample" + std::to_string(i) + "_clean.pgm"), cleaned);
    if (!rep.simp_failed) {
      const Grid panel = triptych(images[i], rep.rerun_params, rerun_density);
      write_pgm(out / ("row" + std::to_string(i) + ".pgm"), panel);
    }
  }
  write_file(out / "report.jsonl", records);

  StageResult sr;
  sr.output_hash = h.hex_digest();
  sr.manifest = detail::make_manifest("report", cfg, sr.output_hash);
  sr.manifest["count"] = images.size();
  write_file(out / "stage_manifest.json", sr.manifest.dump(2) + "\n");
  return sr;
}

// Re-run a stage from its manifest with only the output destination swapped;
// the returned hash must equal the manifest's recorded one.
inline StageResult replay_stage(const json& manifest, const fs::path& scratch_out) {
  RunConfig cfg = RunConfig::from_json(manifest.at("config"));
  cfg.set("out", scratch_out.string());
  if (cfg.has("log")) cfg.set("log", (scratch_out.string() + ".log.csv"));
  const std::string stage = manifest.at("stage");
  if (stage == "simp") return stage_simp(cfg);
  if (stage == "dataset") return stage_dataset(cfg);
  if (stage == "train-regressor") return stage_train_regressor(cfg);
  if (stage == "train-gan") return stage_train_gan(cfg);
  if (stage == "generate") return stage_generate(cfg);
  if (stage == "postprocess") return stage_postprocess(cfg);
  if (stage == "validate") return stage_validate(cfg);
  if (stage == "report") return stage_report(cfg);
  throw ParameterError("replay_stage: unknown stage '" + stage + "'");
}

}  // namespace topogen::pipeline

// Command-line entry point: every pipeline stage as a subcommand. A plain
// key=value config file supplies defaults; flags override it. Exit codes:
// 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <map>

#include "topogen/models/regressor.hpp"
#include "topogen/pipeline/stages.hpp"

using topogen::pipeline::RunConfig;
using topogen::pipeline::StageResult;

namespace {

struct SubCommand {
  CLI::App* app = nullptr;
  std::string config_path;
  RunConfig flags;
};

class CliBuilder {
 public:
  explicit CliBuilder(CLI::App& app) : app_(app) {}

  SubCommand& add(const std::string& name, const std::string& desc) {
    auto& sub = subs_[name];
    sub.app = app_.add_subcommand(name, desc);
    sub.app->add_option("--config", sub.config_path, "key=value config file (flags win)");
    return sub;
  }

  static void opt(SubCommand& sub, const std::string& flag, const std::string& key,
                  const std::string& desc, bool required = false) {
    auto* o = sub.app->add_option_function<std::string>(
        "--" + flag, [&sub, key](const std::string& v) { sub.flags.set(key, v); }, desc);
    if (required) o->required();
  }

  static void onoff(SubCommand& sub, const std::string& flag, const std::string& key,
                    const std::string& desc) {
    sub.app->add_flag_callback(
        "--" + flag, [&sub, key] { sub.flags.set(key, std::string("true")); }, desc);
  }

  RunConfig merged(const std::string& name) const {
    const auto& sub = subs_.at(name);
    RunConfig cfg;
    if (!sub.config_path.empty()) cfg = RunConfig::load(sub.config_path);
    cfg.merge_overrides(sub.flags);
    return cfg;
  }

  bool parsed(const std::string& name) const { return subs_.at(name).app->parsed(); }

  SubCommand& get(const std::string& name) { return subs_.at(name); }

 private:
  CLI::App& app_;
  std::map<std::string, SubCommand> subs_;
};

void report_result(const char* stage, const StageResult& sr) {
  std::cout << stage << " done, output hash " << sr.output_hash << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SIMP dataset, WGAN, and regressor pipeline for planar structures"};
  app.require_subcommand(1);
  CliBuilder cli(app);

  auto& simp = cli.add("simp", "run one topology optimization");
  CliBuilder::opt(simp, "nelx", "nelx", "elements in x");
  CliBuilder::opt(simp, "nely", "nely", "elements in y");
  CliBuilder::opt(simp, "volfrac", "volfrac", "target volume fraction");
  CliBuilder::opt(simp, "penal", "penal", "penalization power");
  CliBuilder::opt(simp, "rmin", "rmin", "filter radius in element widths");
  CliBuilder::opt(simp, "xmin", "xmin", "minimum density");
  CliBuilder::opt(simp, "max-iters", "max_iters", "iteration cap");
  CliBuilder::opt(simp, "tol", "tol", "convergence threshold on max density change");
  CliBuilder::opt(simp, "out", "out", "output .topo path", true);
  CliBuilder::onoff(simp, "pgm", "pgm", "also write a PGM preview");

  auto& dataset = cli.add("dataset", "sweep the parameter box and build the dataset");
  CliBuilder::opt(dataset, "counts", "counts", "grid counts 'vf,penal,rmin' (default 14,12,18)");
  CliBuilder::opt(dataset, "nelx", "nelx", "elements in x");
  CliBuilder::opt(dataset, "nely", "nely", "elements in y");
  CliBuilder::onoff(dataset, "augment", "augment", "append one noisy copy per sample");
  CliBuilder::opt(dataset, "seed", "seed", "augmentation seed");
  CliBuilder::opt(dataset, "noise-fraction", "noise_fraction", "fraction of pixels perturbed");
  CliBuilder::opt(dataset, "noise-magnitude", "noise_magnitude", "uniform noise amplitude");
  CliBuilder::opt(dataset, "jobs", "jobs", "parallel optimizer runs (0 = hardware)");
  CliBuilder::opt(dataset, "out", "out", "output directory", true);
  CliBuilder::onoff(dataset, "pgm", "pgm", "write PGM previews");

  auto& train_reg = cli.add("train-regressor", "train the parameter regressor");
  CliBuilder::opt(train_reg, "data", "data", "dataset directory", true);
  CliBuilder::opt(train_reg, "profile", "profile", "full | desk");
  CliBuilder::opt(train_reg, "input-side", "input_side", "model input resolution");
  CliBuilder::opt(train_reg, "epochs", "epochs", "training epochs");
  CliBuilder::opt(train_reg, "batch", "batch", "batch size");
  CliBuilder::opt(train_reg, "lr", "lr", "Adam learning rate");
  CliBuilder::opt(train_reg, "val-fraction", "val_fraction", "held-out fraction");
  CliBuilder::opt(train_reg, "seed", "seed", "training seed");
  CliBuilder::opt(train_reg, "out", "out", "checkpoint path", true);
  CliBuilder::opt(train_reg, "log", "log", "CSV loss log path");

  auto& train_gan = cli.add("train-gan", "train the Wasserstein GAN");
  CliBuilder::opt(train_gan, "data", "data", "dataset directory", true);
  CliBuilder::opt(train_gan, "profile", "profile", "desk | full");
  CliBuilder::opt(train_gan, "steps", "steps", "generator steps");
  CliBuilder::opt(train_gan, "batch", "batch", "batch size");
  CliBuilder::opt(train_gan, "n-critic", "n_critic", "critic updates per generator step");
  CliBuilder::opt(train_gan, "clip", "clip", "weight clip constant");
  CliBuilder::opt(train_gan, "loss-mode", "loss_mode", "wasserstein | smoothed");
  CliBuilder::opt(train_gan, "critic-bn", "critic_bn", "true | false");
  CliBuilder::opt(train_gan, "seed", "seed", "training seed");
  CliBuilder::opt(train_gan, "out", "out", "checkpoint path", true);
  CliBuilder::opt(train_gan, "log", "log", "CSV critic-estimate log path");

  auto& generate = cli.add("generate", "sample structures from a trained generator");
  CliBuilder::opt(generate, "gan", "gan", "gan checkpoint", true);
  CliBuilder::opt(generate, "n", "n", "number of samples");
  CliBuilder::opt(generate, "seed", "seed", "sampling seed");
  CliBuilder::opt(generate, "out", "out", "output directory", true);

  auto& postproc = cli.add("postprocess", "threshold and smooth a structure image");
  CliBuilder::opt(postproc, "in", "in", "input .topo path", true);
  CliBuilder::opt(postproc, "out", "out", "output .topo path", true);
  CliBuilder::opt(postproc, "threshold", "threshold", "binarization threshold");
  CliBuilder::opt(postproc, "kernel", "kernel", "Gaussian kernel size (odd)");
  CliBuilder::opt(postproc, "sigma", "sigma", "Gaussian sigma");
  CliBuilder::onoff(postproc, "pgm", "pgm", "also write a PGM preview");

  auto& predict = cli.add("predict", "predict design parameters for one image");
  CliBuilder::opt(predict, "model", "model", "regressor checkpoint", true);
  CliBuilder::opt(predict, "image", "image", "input .topo path", true);

  auto& validate = cli.add("validate", "round-trip one image through the regressor and optimizer");
  CliBuilder::opt(validate, "image", "image", "input .topo path", true);
  CliBuilder::opt(validate, "model", "model", "regressor checkpoint", true);
  CliBuilder::opt(validate, "nelx", "nelx", "rerun mesh width");
  CliBuilder::opt(validate, "nely", "nely", "rerun mesh height");
  CliBuilder::opt(validate, "out", "out", "report JSONL path", true);

  auto& report = cli.add("report", "generate, validate, and render side-by-side panels");
  CliBuilder::opt(report, "gan", "gan", "gan checkpoint", true);
  CliBuilder::opt(report, "model", "model", "regressor checkpoint", true);
  CliBuilder::opt(report, "n", "n", "number of rows");
  CliBuilder::opt(report, "seed", "seed", "sampling seed");
  CliBuilder::opt(report, "nelx", "nelx", "rerun mesh width");
  CliBuilder::opt(report, "nely", "nely", "rerun mesh height");
  CliBuilder::opt(report, "out", "out", "output directory", true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help() << std::flush;
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (cli.parsed("simp")) {
      report_result("simp", topogen::pipeline::stage_simp(cli.merged("simp")));
    } else if (cli.parsed("dataset")) {
      report_result("dataset", topogen::pipeline::stage_dataset(cli.merged("dataset")));
    } else if (cli.parsed("train-regressor")) {
      const StageResult sr = topogen::pipeline::stage_train_regressor(cli.merged("train-regressor"));
      report_result("train-regressor", sr);
      std::cout << "validation " << sr.manifest.at("val").dump() << "\n";
    } else if (cli.parsed("train-gan")) {
      report_result("train-gan", topogen::pipeline::stage_train_gan(cli.merged("train-gan")));
    } else if (cli.parsed("generate")) {
      report_result("generate", topogen::pipeline::stage_generate(cli.merged("generate")));
    } else if (cli.parsed("postprocess")) {
      report_result("postprocess", topogen::pipeline::stage_postprocess(cli.merged("postprocess")));
    } else if (cli.parsed("predict")) {
      const RunConfig cfg = cli.merged("predict");
      auto model = topogen::models::RegressorModel<float>::load(cfg.str("model"));
      const topogen::Grid image = topogen::read_topo(cfg.str("image"));
      const topogen::Grid input =
          topogen::resample_area(image, model.input_side, model.input_side);
      const auto p = model.predict(input);
      std::printf("vol_frac=%.6f penal=%.6f r_min=%.6f\n", p.vol_frac, p.penal, p.r_min);
    } else if (cli.parsed("validate")) {
      report_result("validate", topogen::pipeline::stage_validate(cli.merged("validate")));
    } else if (cli.parsed("report")) {
      report_result("report", topogen::pipeline::stage_report(cli.merged("report")));
    }
  } catch (const topogen::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

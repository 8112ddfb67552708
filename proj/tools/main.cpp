// pixsub — super-resolution with a hard image-formation constraint.
//
// Any option of any subcommand is a view onto one flat config: defaults,
// then --config file, then dedicated flags, then --set key=value pairs
// (later layers win). --dump-config prints the merged result.

#include <deque>
#include <iostream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "pixsub/commands.hpp"
#include "pixsub/config.hpp"

namespace {

// Binds CLI flags to config keys; only flags the user actually passed are
// applied, so config-file values survive untouched otherwise.
class KeyedFlags {
 public:
  void option(CLI::App* cmd, const std::string& flag, const std::string& key,
              const std::string& help) {
    storage_.emplace_back();
    bound_.emplace_back(cmd->add_option(flag, storage_.back(), help), key, &storage_.back());
  }

  void flag(CLI::App* cmd, const std::string& flag_name, const std::string& key,
            const std::string& help) {
    storage_.emplace_back("1");
    bound_.emplace_back(cmd->add_flag(flag_name, help), key, &storage_.back());
  }

  void apply(pixsub::RunConfig& cfg) const {
    for (const auto& [opt, key, value] : bound_)
      if (opt->count() > 0) cfg.set(key, *value);
  }

 private:
  std::deque<std::string> storage_;  // stable addresses for CLI11 bindings
  std::vector<std::tuple<CLI::Option*, std::string, std::string*>> bound_;
};

void add_degrade_model_flags(CLI::App* cmd, KeyedFlags& kf) {
  kf.option(cmd, "--scale,-s", "scale", "downscaling factor (1-4)");
  kf.option(cmd, "--mode", "degrade.mode", "degradation mode: gaussian-decimate or bicubic");
  kf.option(cmd, "--sigma", "degrade.sigma", "Gaussian blur std-dev (0 = 0.5*scale)");
  kf.option(cmd, "--kernel-size", "degrade.kernel_size", "blur kernel side length (0 = auto)");
  kf.option(cmd, "--noise", "degrade.noise_level", "additive Gaussian noise std-dev in [0,0.1]");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"super-resolution with a hard image-formation constraint"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::vector<std::string> overrides;
  bool dump = false;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--set", overrides, "override one config key (key=value); repeatable, wins over flags");
  app.add_flag("--dump-config", dump, "print the merged configuration and exit");

  KeyedFlags kf;

  CLI::App* degrade = app.add_subcommand("degrade", "generate LR observations from HR images");
  kf.option(degrade, "--input,-i", "io.input", "HR image file or directory");
  kf.option(degrade, "--out-dir,-o", "io.out_dir", "output directory for LR images + manifest");
  kf.option(degrade, "--seed", "seed", "base RNG seed for noise");
  add_degrade_model_flags(degrade, kf);

  CLI::App* sr = app.add_subcommand("sr", "run the refinement cascade on one LR image");
  kf.option(sr, "--input,-i", "io.input", "LR image file");
  kf.option(sr, "--output,-o", "io.output", "SR output image path");
  kf.option(sr, "--stages,-T", "cascade.T", "number of cascade stages");
  kf.option(sr, "--kernel-sigma", "cascade.kernel_sigma", "cascade blur kernel sigma override");
  kf.flag(sr, "--shared-weights", "cascade.shared_weights", "stages >= 3 reuse the stage-2 net");
  kf.flag(sr, "--trace", "sr.trace", "dump per-stage images and a metrics JSON");
  kf.flag(sr, "--check", "sr.check", "report per-stage constraint residuals");
  add_degrade_model_flags(sr, kf);
  std::string sr_kind, sr_weights, sr_iters, sr_step;
  CLI::Option* sr_kind_opt =
      sr->add_option("--kind", sr_kind, "refiner kind for every stage (bicubic|ibp|gradprior|toynet)");
  CLI::Option* sr_weights_opt = sr->add_option(
      "--weights", sr_weights, "weight file prefix; stage t loads <prefix>_stage<t>.pxw");
  CLI::Option* sr_iters_opt = sr->add_option("--iters", sr_iters, "iterations for every ibp/gradprior stage");
  CLI::Option* sr_step_opt = sr->add_option("--step", sr_step, "step size for every ibp/gradprior stage");

  CLI::App* train = app.add_subcommand("train", "fit cascade nets on HR (and optional LR) images");
  kf.option(train, "--hr", "io.hr", "HR training image directory");
  kf.option(train, "--lr-dir", "io.lr", "LR observation directory (omit to degrade on the fly)");
  kf.option(train, "--weights,-w", "io.weights", "output weight file prefix");
  kf.option(train, "--log", "io.log", "training loss CSV path");
  kf.option(train, "--stages,-T", "cascade.T", "number of cascade stages");
  kf.flag(train, "--shared-weights", "cascade.shared_weights", "train stage 2 once, reuse for stages >= 3");
  kf.option(train, "--features", "net.features", "network feature width");
  kf.option(train, "--blocks", "net.blocks", "residual block count");
  kf.option(train, "--epochs", "train.epochs", "passes over the training set");
  kf.option(train, "--learning-rate", "train.lr", "Adam learning rate");
  kf.option(train, "--patch", "train.patch", "training crop size in LR pixels");
  kf.option(train, "--train-seed", "train.seed", "seed for init, shuffling and crops");
  kf.option(train, "--loss", "train.loss", "l1 (stage-wise cascade) or soft (single-stage formation penalty)");
  kf.option(train, "--lambda", "train.lambda", "soft formation-loss weight");
  kf.option(train, "--seed", "seed", "seed for on-the-fly degradation");
  add_degrade_model_flags(train, kf);

  CLI::App* eval = app.add_subcommand("eval", "score SR results against ground truth");
  kf.option(eval, "--sr", "io.sr", "SR result directory");
  kf.option(eval, "--hr", "io.hr", "ground-truth directory");
  kf.option(eval, "--lr-dir", "io.lr", "LR directory for the observation-consistency report");
  kf.option(eval, "--protocol", "eval.protocol", "y-channel-shaved or rgb-full");
  kf.option(eval, "--residual", "eval.residual", "consistency report mode: float or 8bit");
  kf.option(eval, "--json", "io.output", "write a JSON report here");
  kf.option(eval, "--scale,-s", "scale", "scale factor (stem suffix + shave width)");
  kf.option(eval, "--mode", "degrade.mode", "formation model for the consistency report");
  kf.option(eval, "--sigma", "degrade.sigma", "formation kernel sigma");
  kf.option(eval, "--kernel-size", "degrade.kernel_size", "formation kernel size");

  CLI::App* check = app.add_subcommand("check-constraint",
                                       "measure how well an HR estimate explains an LR observation");
  kf.option(check, "--input,-i", "io.input", "HR estimate image");
  kf.option(check, "--lr-obs", "io.lr", "LR observation image");
  kf.option(check, "--json", "io.output", "write a JSON report here");
  add_degrade_model_flags(check, kf);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    pixsub::RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    kf.apply(cfg);

    // per-stage broadcasts for `sr` convenience flags
    if (app.got_subcommand(sr)) {
      const int stages = cfg.get_int("cascade.T");
      const bool shared = cfg.get_bool("cascade.shared_weights");
      for (int t = 1; t <= stages; ++t) {
        const std::string p = "stage" + std::to_string(t) + ".";
        if (sr_kind_opt->count() > 0) cfg.set(p + "kind", sr_kind);
        if (sr_iters_opt->count() > 0) cfg.set(p + "iters", sr_iters);
        if (sr_step_opt->count() > 0) cfg.set(p + "step", sr_step);
        if (sr_weights_opt->count() > 0 && !(shared && t > 2))
          cfg.set(p + "weights", sr_weights + "_stage" + std::to_string(t) + ".pxw");
      }
    }

    for (const std::string& kv : overrides) {
      const size_t eq = kv.find('=');
      if (eq == std::string::npos)
        throw pixsub::ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }

    if (dump) {
      std::cout << cfg.dump();
      return 0;
    }

    if (app.got_subcommand(degrade)) return pixsub::cmd_degrade(cfg);
    if (app.got_subcommand(sr)) return pixsub::cmd_sr(cfg);
    if (app.got_subcommand(train)) return pixsub::cmd_train(cfg);
    if (app.got_subcommand(eval)) return pixsub::cmd_eval(cfg);
    if (app.got_subcommand(check)) return pixsub::cmd_check_constraint(cfg);

    std::cerr << app.help();
    return 2;
  } catch (const pixsub::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pixsub::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const pixsub::Error& e) {  // Io/Format/Dimension/Data
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

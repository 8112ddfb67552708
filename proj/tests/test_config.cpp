#include <gtest/gtest.h>

#include <fstream>

#include "pixsub/config.hpp"
#include "support/synth.hpp"

using namespace pixsub;
using testsupport::TempDir;

TEST(RunConfigTest, DefaultsAreQueryable) {
  const RunConfig cfg;
  EXPECT_EQ(cfg.get_int("scale"), 2);
  EXPECT_EQ(cfg.get_int("cascade.T"), 3);
  EXPECT_EQ(cfg.get("degrade.mode"), "bicubic");
  EXPECT_DOUBLE_EQ(cfg.get_double("train.lr"), 1e-4);
  EXPECT_FALSE(cfg.get_bool("cascade.shared_weights"));
  EXPECT_FALSE(cfg.is_set("scale"));
}

TEST(RunConfigTest, UnknownKeysRejected) {
  RunConfig cfg;
  EXPECT_THROW(cfg.set("scales", "2"), ConfigError);
  EXPECT_THROW(cfg.set("degrade.bogus", "1"), ConfigError);
  EXPECT_THROW(cfg.get("nope"), ConfigError);
}

TEST(RunConfigTest, StageKeyPattern) {
  RunConfig cfg;
  EXPECT_NO_THROW(cfg.set("stage1.kind", "ibp"));
  EXPECT_NO_THROW(cfg.set("stage12.iters", "3"));
  EXPECT_THROW(cfg.set("stage0.kind", "ibp"), ConfigError);   // numbered from 1
  EXPECT_THROW(cfg.set("stage01.kind", "ibp"), ConfigError);  // no leading zero
  EXPECT_THROW(cfg.set("stage.kind", "ibp"), ConfigError);
  EXPECT_THROW(cfg.set("stage1.bogus", "1"), ConfigError);
  EXPECT_EQ(cfg.get("stage1.kind"), "ibp");
  EXPECT_EQ(cfg.get("stage3.kind"), "bicubic");  // pattern default
  EXPECT_EQ(cfg.get("stage3.iters"), "10");
}

TEST(RunConfigTest, SetOverridesDefault) {
  RunConfig cfg;
  cfg.set("scale", "4");
  EXPECT_EQ(cfg.get_int("scale"), 4);
  EXPECT_TRUE(cfg.is_set("scale"));
}

TEST(RunConfigTest, StrictParsing) {
  RunConfig cfg;
  cfg.set("scale", "2x");
  EXPECT_THROW(cfg.get_int("scale"), ConfigError);
  cfg.set("train.lr", "fast");
  EXPECT_THROW(cfg.get_double("train.lr"), ConfigError);
  cfg.set("sr.trace", "yes");
  EXPECT_THROW(cfg.get_bool("sr.trace"), ConfigError);
  cfg.set("sr.trace", "true");
  EXPECT_TRUE(cfg.get_bool("sr.trace"));
  cfg.set("sr.trace", "0");
  EXPECT_FALSE(cfg.get_bool("sr.trace"));
}

TEST(RunConfigTest, LoadFileParsing) {
  TempDir tmp;
  {
    std::ofstream os(tmp.file("run.cfg"));
    os << "# a comment\n"
       << "\n"
       << "scale = 3\n"
       << "  degrade.mode=gaussian-decimate  \n"
       << "stage1.kind = ibp\n";
  }
  RunConfig cfg;
  cfg.load_file(tmp.file("run.cfg"));
  EXPECT_EQ(cfg.get_int("scale"), 3);
  EXPECT_EQ(cfg.get("degrade.mode"), "gaussian-decimate");
  EXPECT_EQ(cfg.get("stage1.kind"), "ibp");
}

TEST(RunConfigTest, LoadFileErrors) {
  TempDir tmp;
  {
    std::ofstream os(tmp.file("bad.cfg"));
    os << "scale\n";
  }
  RunConfig cfg;
  EXPECT_THROW(cfg.load_file(tmp.file("bad.cfg")), ConfigError);
  EXPECT_THROW(cfg.load_file(tmp.file("missing.cfg")), IoError);
  {
    std::ofstream os(tmp.file("unknown.cfg"));
    os << "not.a.key=1\n";
  }
  EXPECT_THROW(cfg.load_file(tmp.file("unknown.cfg")), ConfigError);
}

TEST(RunConfigTest, DumpRoundTrips) {
  TempDir tmp;
  RunConfig cfg;
  cfg.set("scale", "4");
  cfg.set("cascade.T", "2");
  cfg.set("stage2.kind", "toynet");
  cfg.set("stage2.weights", "/tmp/w_stage2.pxw");
  {
    std::ofstream os(tmp.file("dump.cfg"));
    os << cfg.dump();
  }
  RunConfig back;
  back.load_file(tmp.file("dump.cfg"));
  EXPECT_EQ(back.dump(), cfg.dump());
  EXPECT_EQ(back.get_int("scale"), 4);
  EXPECT_EQ(back.get("stage2.kind"), "toynet");
}

TEST(RunConfigTest, DegradeSpecValidation) {
  RunConfig cfg;
  cfg.set("degrade.mode", "nearest");
  EXPECT_THROW(cfg.degrade_spec(), ConfigError);
  cfg.set("degrade.mode", "gaussian-decimate");
  cfg.set("degrade.sigma", "-1");
  EXPECT_THROW(cfg.degrade_spec(), ConfigError);
  cfg.set("degrade.sigma", "0.8");
  cfg.set("degrade.noise_level", "0.5");
  EXPECT_THROW(cfg.degrade_spec(), ConfigError);
  cfg.set("degrade.noise_level", "0.05");
  const DegradeSpec spec = cfg.degrade_spec();
  EXPECT_EQ(spec.mode, DegradeMode::GaussianDecimate);
  EXPECT_DOUBLE_EQ(spec.sigma, 0.8);
  EXPECT_DOUBLE_EQ(spec.noise_level, 0.05);
}

TEST(RunConfigTest, StageSpecValidation) {
  RunConfig cfg;
  cfg.set("stage1.kind", "gradprior");
  cfg.set("stage1.iters", "0");
  EXPECT_THROW(cfg.stage_spec(1), ConfigError);
  cfg.set("stage1.iters", "7");
  cfg.set("stage1.step", "0");
  EXPECT_THROW(cfg.stage_spec(1), ConfigError);
  cfg.set("stage1.step", "0.5");
  cfg.set("stage1.lambda_prior", "-0.1");
  EXPECT_THROW(cfg.stage_spec(1), ConfigError);
  cfg.set("stage1.lambda_prior", "0.02");
  const RefinerSpec spec = cfg.stage_spec(1);
  EXPECT_EQ(spec.kind, RefinerKind::GradPrior);
  EXPECT_EQ(spec.iters, 7);
  EXPECT_DOUBLE_EQ(spec.step, 0.5);
  EXPECT_DOUBLE_EQ(spec.lambda_prior, 0.02);

  cfg.set("stage2.kind", "warp");
  EXPECT_THROW(cfg.stage_spec(2), ConfigError);
}

TEST(RunConfigTest, CascadeConfigAssembly) {
  RunConfig cfg;
  cfg.set("cascade.T", "2");
  cfg.set("stage1.kind", "toynet");
  cfg.set("stage1.weights", "a.pxw");
  cfg.set("stage2.kind", "ibp");
  const CascadeConfig ccfg = cfg.cascade_config();
  EXPECT_EQ(ccfg.stages_count, 2);
  ASSERT_EQ(ccfg.stages.size(), 2u);
  EXPECT_EQ(ccfg.stages[0].kind, RefinerKind::ToyNet);
  EXPECT_EQ(ccfg.stages[0].weights_path, "a.pxw");
  EXPECT_EQ(ccfg.stages[1].kind, RefinerKind::Ibp);

  cfg.set("cascade.T", "0");
  EXPECT_THROW(cfg.cascade_config(), ConfigError);
  cfg.set("cascade.T", "9");
  EXPECT_THROW(cfg.cascade_config(), ConfigError);
}

TEST(RunConfigTest, TrainOptionsValidation) {
  RunConfig cfg;
  cfg.set("train.epochs", "0");
  EXPECT_EQ(cfg.train_options().epochs, 0);  // zero epochs is a valid request
  cfg.set("train.epochs", "-1");
  EXPECT_THROW(cfg.train_options(), ConfigError);
  cfg.set("train.epochs", "2");
  cfg.set("train.lr", "0");
  EXPECT_THROW(cfg.train_options(), ConfigError);
  cfg.set("train.lr", "1e-3");
  cfg.set("train.beta1", "1.0");
  EXPECT_THROW(cfg.train_options(), ConfigError);
  cfg.set("train.beta1", "0.9");
  const TrainOptions opts = cfg.train_options();
  EXPECT_EQ(opts.epochs, 2);
  EXPECT_DOUBLE_EQ(opts.lr, 1e-3);
}

TEST(RunConfigTest, EvalProtocolParse) {
  RunConfig cfg;
  EXPECT_EQ(cfg.eval_protocol(), EvalProtocol::YChannelShaved);
  cfg.set("eval.protocol", "rgb-full");
  EXPECT_EQ(cfg.eval_protocol(), EvalProtocol::RgbFull);
  cfg.set("eval.protocol", "luma");
  EXPECT_THROW(cfg.eval_protocol(), ConfigError);
}

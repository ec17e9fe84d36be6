#include <gtest/gtest.h>

#include "canet/config.hpp"
#include "canet/errors.hpp"

namespace canet {
namespace {

TEST(Config, EmptyTextYieldsDefaults) {
  EXPECT_EQ(serialize_run_config(parse_run_config("")), serialize_run_config(RunConfig{}));
}

TEST(Config, SerializeParseIsAFixedPoint) {
  RunConfig cfg;
  cfg.model.cam.scales = {3, 6, 12};
  cfg.model.cam.topology = Topology::kSeries;
  cfg.model.cam.use_fsm = false;
  cfg.model.use_aux = false;
  cfg.train.base_lr = 0.1 / 3.0;
  cfg.train.eval_scales = {0.5, 1.0, 1.75};
  cfg.scene.noise = 1.0 / 7.0;
  cfg.scene.seed = 123456789012345ULL;
  cfg.output_dir = "out dir";
  const std::string text = serialize_run_config(cfg);
  const RunConfig back = parse_run_config(text);
  EXPECT_EQ(serialize_run_config(back), text);
  EXPECT_EQ(back.train.base_lr, cfg.train.base_lr);
  EXPECT_EQ(back.scene.noise, cfg.scene.noise);
  EXPECT_EQ(back.scene.seed, cfg.scene.seed);
  EXPECT_EQ(back.model.cam.scales, cfg.model.cam.scales);
  EXPECT_EQ(back.model.cam.topology, Topology::kSeries);
  EXPECT_FALSE(back.model.cam.use_fsm);
  EXPECT_EQ(back.output_dir, "out dir");
}

TEST(Config, ParsesCommentsListsAndBooleans) {
  const RunConfig cfg = parse_run_config(
      "# run\n[cam]\nscales = 2, 4,8  # three\ntopology = parallel\n"
      "[train]\naugment = false\ntotal_iters = 10\n[paths]\ntrain_data = d\n");
  EXPECT_EQ(cfg.model.cam.scales, (std::vector<int>{2, 4, 8}));
  EXPECT_EQ(cfg.model.cam.topology, Topology::kParallel);
  EXPECT_FALSE(cfg.train.augment);
  EXPECT_EQ(cfg.train.total_iters, 10);
  EXPECT_EQ(cfg.train_data, "d");
}

TEST(Config, UnknownKeysAreNamed) {
  try {
    parse_run_config("[train]\nbogus = 1\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.bogus"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_run_config("[nowhere]\n"), ConfigError);
  EXPECT_THROW(parse_run_config("base_lr = 1\n"), ConfigError);
}

TEST(Config, MalformedValuesAreRejected) {
  EXPECT_THROW(parse_run_config("[train]\nbase_lr = fast\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[train]\nbatch_size = 0\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[train]\nbatch_size = 2\nbatch_size = 3\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[train]\naugment = maybe\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[cam]\ntopology = ring\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[backbone]\nstage_blocks = 1,1,1\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[train\n"), ConfigError);
}

TEST(Config, MissingFileIsAnIoError) {
  EXPECT_THROW(load_run_config("/nonexistent/canet.ini"), IoError);
}

}  // namespace
}  // namespace canet

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "canet/checkpoint.hpp"
#include "canet/errors.hpp"
#include "canet/optimizer.hpp"
#include "canet/trainer.hpp"
#include "support/oracles.hpp"

namespace canet {
namespace {

Dataset small_data(int count = 4) {
  SceneSpec spec;
  spec.height = 32;
  spec.width = 32;
  return generate_dataset(spec, count);
}

TrainConfig short_run() {
  TrainConfig cfg;
  cfg.total_iters = 3;
  cfg.batch_size = 2;
  cfg.crop = 32;
  return cfg;
}

TEST(PolyLr, HitsEndpointsAndMidpoint) {
  EXPECT_NEAR(poly_lr(0.01, 0, 100, 0.9), 0.01, 1e-15);
  EXPECT_NEAR(poly_lr(0.01, 50, 100, 0.9), 0.01 * std::pow(0.5, 0.9), 1e-15);
  EXPECT_EQ(poly_lr(0.01, 100, 100, 0.9), 0.0);
  EXPECT_ANY_THROW(poly_lr(0.01, 101, 100, 0.9));
}

TEST(Sgd, TwoStepMomentumRecurrence) {
  Parameter p;
  p.name = "w";
  p.value = Tensor(Shape{1, 1, 1, 2}, std::vector<double>{1.0, -2.0});
  p.grad = Tensor(Shape{1, 1, 1, 2}, std::vector<double>{0.5, 0.25});
  Tensor v(p.value.shape());
  const double lr = 0.1, mu = 0.9, wd = 0.01;
  double w0 = 1.0, v0 = 0.0;
  for (int step = 0; step < 2; ++step) {
    sgd_update(p, v, lr, mu, wd);
    v0 = mu * v0 + (0.5 + wd * w0);
    w0 -= lr * v0;
  }
  EXPECT_NEAR(p.value[0], w0, 1e-15);
  EXPECT_NEAR(v[0], v0, 1e-15);
  // Step 1: v = 0.5 + 0.01 = 0.51, w = 0.949. Step 2: v = 0.459 + 0.50949.
  EXPECT_NEAR(p.value[0], 0.949 - 0.1 * (0.9 * 0.51 + 0.5 + 0.01 * 0.949), 1e-15);

  Parameter exempt = p;
  exempt.weight_decay_exempt = true;
  exempt.value = Tensor(Shape{1, 1, 1, 2}, 3.0);
  Tensor ve(exempt.value.shape());
  sgd_update(exempt, ve, lr, mu, wd);
  EXPECT_NEAR(exempt.value[0], 3.0 - 0.1 * 0.5, 1e-15);
}

TEST(Trainer, ZeroIterationsReturnsInitialState) {
  CanetModel model(CanetConfig::toy(5), 1);
  TrainConfig cfg = short_run();
  cfg.total_iters = 0;
  const TrainResult r = train(model, small_data(), cfg, "cfg");
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(r.checkpoint.iteration, 0u);
  EXPECT_EQ(r.checkpoint.config_text, "cfg");
  const Parameter& first = model.graph().parameters().front();
  EXPECT_EQ(testing::max_abs_diff(r.checkpoint.find("param/" + first.name)->value, first.value), 0.0);
}

TEST(Trainer, ZeroLearningRateLeavesWeightsUntouched) {
  CanetModel model(CanetConfig::toy(5), 2);
  CanetModel ref(CanetConfig::toy(5), 2);
  TrainConfig cfg = short_run();
  cfg.base_lr = 0.0;
  train(model, small_data(), cfg);
  for (std::size_t i = 0; i < model.graph().parameters().size(); ++i) {
    EXPECT_EQ(testing::max_abs_diff(model.graph().parameters()[i].value,
                                    ref.graph().parameters()[i].value),
              0.0);
  }
}

TEST(Trainer, DeterministicAndLogsEveryIteration) {
  const Dataset data = small_data();
  std::vector<std::string> streamed;
  CanetModel a(CanetConfig::toy(5), 3), b(CanetConfig::toy(5), 3);
  TrainConfig cfg = short_run();
  cfg.eval_every = 3;
  const TrainResult ra = train(a, data, cfg, "x", [&](const std::string& l) { streamed.push_back(l); });
  const TrainResult rb = train(b, data, cfg, "x");
  EXPECT_EQ(encode_checkpoint(ra.checkpoint), encode_checkpoint(rb.checkpoint));
  EXPECT_EQ(ra.log, rb.log);
  EXPECT_EQ(ra.log, streamed);
  ASSERT_EQ(ra.log.size(), 4u);
  EXPECT_EQ(ra.log[0].rfind("event=train iter=1 lr=1.000000e-02 loss=", 0), 0u) << ra.log[0];
  EXPECT_NE(ra.log[0].find(" lambda=0.1"), std::string::npos);
  EXPECT_EQ(ra.log[3].rfind("event=eval iter=3 pa=", 0), 0u) << ra.log[3];
  EXPECT_TRUE(std::isfinite(ra.final_loss));
  EXPECT_GT(ra.final_loss, 0.0);
}

TEST(Trainer, BatchOfOneWarns) {
  CanetModel model(CanetConfig::toy(5), 4);
  TrainConfig cfg = short_run();
  cfg.batch_size = 1;
  cfg.total_iters = 1;
  const TrainResult r = train(model, small_data(2), cfg);
  EXPECT_EQ(r.log.front(), "event=warning message=batch_size_1_uses_running_bn_statistics");
}

TEST(Trainer, NonFiniteLossRaisesDivergence) {
  Dataset data = small_data(2);
  for (Sample& s : data.samples) s.image[17] = std::numeric_limits<double>::quiet_NaN();
  CanetModel model(CanetConfig::toy(5), 5);
  TrainConfig cfg = short_run();
  cfg.augment = false;
  EXPECT_THROW(train(model, data, cfg), DivergenceError);
}

TEST(Trainer, RejectsInvalidConfig) {
  CanetModel model(CanetConfig::toy(5), 6);
  TrainConfig cfg = short_run();
  cfg.momentum = 1.0;
  EXPECT_THROW(train(model, small_data(), cfg), ConfigError);
  cfg = short_run();
  EXPECT_THROW(train(model, Dataset{}, cfg), ConfigError);
}

TEST(Checkpoint, ByteIdenticalRoundTripAndRestore) {
  const Dataset data = small_data();
  CanetModel model(CanetConfig::toy(5), 7);
  const TrainResult r = train(model, data, short_run(), "[train]\n");
  const std::vector<std::uint8_t> bytes = encode_checkpoint(r.checkpoint);
  const Checkpoint back = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(back), bytes);
  EXPECT_EQ(back.iteration, 3u);
  EXPECT_EQ(back.config_text, "[train]\n");

  const auto path = std::filesystem::temp_directory_path() / "canet_test_ckpt.cant";
  save_checkpoint(path, r.checkpoint);
  CanetModel fresh(CanetConfig::toy(5), 99);
  SgdOptimizer opt(0.9, 1e-4);
  restore_checkpoint(load_checkpoint(path), fresh, &opt);
  std::filesystem::remove(path);
  EXPECT_EQ(testing::max_abs_diff(fresh.infer_logits(data.samples[0].image),
                                  model.infer_logits(data.samples[0].image)),
            0.0);
  EXPECT_EQ(encode_checkpoint(capture_checkpoint(fresh, &opt, 3, "[train]\n")), bytes);
}

TEST(Checkpoint, CorruptPayloadsAreRejected) {
  CanetModel model(CanetConfig::toy(5), 8);
  std::vector<std::uint8_t> bytes = encode_checkpoint(capture_checkpoint(model, nullptr, 0, ""));
  std::vector<std::uint8_t> bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), ParseError);
  EXPECT_THROW(decode_checkpoint({bytes.begin(), bytes.end() - 1}), ParseError);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(decode_checkpoint(bad), ParseError);

  CanetModel other(CanetConfig::toy(3), 8);
  EXPECT_THROW(restore_checkpoint(decode_checkpoint(bytes), other), ShapeError);
}

TEST(Tta, SingleScaleMatchesPlainForward) {
  CanetModel model(CanetConfig::toy(5), 9);
  const Tensor image = small_data(1).samples[0].image;
  const Tensor probs = tta_probabilities(model, image, {1.0}, false);
  EXPECT_EQ(argmax_channels(probs), argmax_channels(model.infer_logits(image)));
  EXPECT_LT(testing::max_abs_diff(probs, softmax_channels(model.infer_logits(image))), 1e-15);
}

TEST(Tta, MultiScaleFlipIsNormalizedAndMirrorEquivariant) {
  CanetModel model(CanetConfig::toy(5), 10);
  const Tensor image = small_data(1).samples[0].image;
  const std::vector<double> scales{0.75, 1.0, 1.5};
  const Tensor p = tta_probabilities(model, image, scales, true);
  ASSERT_EQ(p.shape(), (Shape{1, 5, 32, 32}));
  for (int i = 0; i < 32 * 32; ++i) {
    double s = 0.0;
    for (int c = 0; c < 5; ++c) s += p.plane(0, c)[i];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  const Tensor q = tta_probabilities(model, flip_horizontal(image), scales, true);
  EXPECT_LT(testing::max_abs_diff(flip_horizontal(q), p), 1e-12);
}

TEST(Evaluate, ConfusionMatchesArgmaxPredictions) {
  CanetModel model(CanetConfig::toy(5), 11);
  const Dataset data = small_data(2);
  const EvalResult r = evaluate(model, data);
  ConfusionMatrix cm(5);
  for (const Sample& s : data.samples) cm.update(argmax_channels(model.infer_logits(s.image)), s.label);
  EXPECT_EQ(r.confusion, cm);
  EXPECT_EQ(r.pixel_accuracy, pixel_accuracy(cm));
  EXPECT_EQ(r.iou.mean, mean_iou(cm).mean);
}

}  // namespace
}  // namespace canet

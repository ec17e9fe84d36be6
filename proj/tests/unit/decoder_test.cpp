#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "canet/canet_model.hpp"
#include "canet/errors.hpp"
#include "support/oracles.hpp"

namespace canet {
namespace {

using testing::bn_params;
using testing::conv_params;

bool tape_has_scope(const Tape& tape, const std::string& prefix) {
  for (const TapeNode& n : tape.nodes()) {
    if (n.scope.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

TEST(Decoder, ToyParameterCountMatchesLayout) {
  const CanetConfig cfg = CanetConfig::toy(5);
  CanetModel model(cfg, 1);
  const std::size_t want =
      conv_params(16, 48, 3) + bn_params(48) + conv_params(64 + 48, 64, 3) + bn_params(64) +
      conv_params(64, 64, 3) + bn_params(64) + conv_params(64, 5, 1, true);
  EXPECT_EQ(model.graph().count_params({"decoder"}), want);
  EXPECT_EQ(model.graph().count_params({"aux"}), conv_params(64, 5, 3, true));
  EXPECT_EQ(model.graph().count_params(), 508354u);
}

TEST(Decoder, ZeroClassifierGivesUniformLoss) {
  CanetModel model(CanetConfig::toy(5), 2);
  model.graph().find("decoder.classifier.weight")->value.fill(0.0);
  model.graph().find("decoder.classifier.bias")->value.fill(0.0);
  std::mt19937_64 rng(3);
  Tape tape;
  CanetOutputs out =
      model.forward(tape.constant(testing::random_tensor({1, 3, 40, 36}, rng)), BnMode::kEval);
  LabelMap labels(1, 40, 36, 2);
  Var loss = softmax_cross_entropy(out.logits, labels);
  EXPECT_NEAR(loss.value()[0], std::log(5.0), 1e-12);
}

TEST(Decoder, RejectsMismatchedExtents) {
  ModelGraph g(4);
  Decoder dec(g, DecoderConfig{}, 8, 8);
  Tape tape;
  Var low = tape.constant(Tensor({1, 8, 16, 16}));
  EXPECT_THROW(dec(low, tape.constant(Tensor({1, 8, 9, 8})), 64, 64, BnMode::kEval), ShapeError);
  Var ok = dec(tape.constant(Tensor({1, 8, 15, 15})), tape.constant(Tensor({1, 8, 8, 8})),
               60, 60, BnMode::kEval);
  EXPECT_EQ(ok.shape(), (Shape{1, 5, 60, 60}));
}

TEST(Model, AuxHeadRunsOnlyWhenRequested) {
  CanetModel model(CanetConfig::toy(4), 5);
  Tensor image(Shape{2, 3, 32, 32}, 0.4);
  {
    Tape tape;
    CanetOutputs out = model.forward(tape.constant(image), BnMode::kEval);
    EXPECT_FALSE(out.aux_logits.has_value());
    EXPECT_FALSE(tape_has_scope(tape, "aux"));
  }
  {
    Tape tape;
    CanetOutputs out = model.forward(tape.constant(image), BnMode::kTrain);
    ASSERT_TRUE(out.aux_logits.has_value());
    EXPECT_EQ(out.aux_logits->shape(), (Shape{2, 4, 32, 32}));
    EXPECT_TRUE(tape_has_scope(tape, "aux"));
  }
  {
    Tape tape;
    EXPECT_TRUE(model.forward(tape.constant(image), BnMode::kEval, true).aux_logits.has_value());
  }
}

TEST(Model, PlainHeadReplacesDecoder) {
  CanetConfig cfg = CanetConfig::toy(3);
  cfg.use_decoder = false;
  cfg.use_aux = false;
  cfg.cam.use_fsm = false;
  CanetModel model(cfg, 6);
  EXPECT_EQ(model.graph().find("decoder.fuse1.conv.weight"), nullptr);
  EXPECT_EQ(model.graph().count_params({"aux"}), 0u);
  EXPECT_EQ(model.graph().count_params({"fsm"}), 0u);
  EXPECT_EQ(model.graph().count_params({"decoder"}), conv_params(64, 3, 1, true));
  Tape tape;
  CanetOutputs out = model.forward(tape.constant(Tensor({1, 3, 37, 41}, 0.2)), BnMode::kTrain);
  EXPECT_EQ(out.logits.shape(), (Shape{1, 3, 37, 41}));
  EXPECT_FALSE(out.aux_logits.has_value());
}

TEST(Model, InferLogitsMatchesEvalForward) {
  CanetModel model(CanetConfig::toy(5), 7);
  std::mt19937_64 rng(8);
  Tensor image = testing::random_tensor({1, 3, 48, 40}, rng);
  Tape tape;
  Tensor want = model.forward(tape.constant(image), BnMode::kEval).logits.value();
  EXPECT_EQ(testing::max_abs_diff(model.infer_logits(image), want), 0.0);
}

TEST(Model, SameSeedSameWeights) {
  CanetModel a(CanetConfig::toy(5), 9), b(CanetConfig::toy(5), 9), c(CanetConfig::toy(5), 10);
  bool differs = false;
  for (std::size_t i = 0; i < a.graph().parameters().size(); ++i) {
    const Tensor& va = a.graph().parameters()[i].value;
    EXPECT_EQ(testing::max_abs_diff(va, b.graph().parameters()[i].value), 0.0);
    differs |= testing::max_abs_diff(va, c.graph().parameters()[i].value) > 0.0;
  }
  EXPECT_TRUE(differs);
}

}  // namespace
}  // namespace canet

#include <gtest/gtest.h>

#include <random>

#include "canet/backbone.hpp"
#include "canet/errors.hpp"
#include "canet/model_graph.hpp"
#include "support/oracles.hpp"

namespace canet {
namespace {

using testing::bn_params;
using testing::conv_params;

// Parameter total enumerated from the layer layout, independent of the
// graph bookkeeping.
std::size_t expected_backbone_params(const BackboneConfig& cfg, int in_channels) {
  const int mid = cfg.stem_channels / 2;
  std::size_t total = conv_params(in_channels, mid, 3) + bn_params(mid) +
                      conv_params(mid, mid, 3) + bn_params(mid) +
                      conv_params(mid, cfg.stem_channels, 3) +
                      bn_params(cfg.stem_channels);
  const int strides[4] = {1, 2, 1, 1};
  int in = cfg.stem_channels;
  for (int s = 0; s < 4; ++s) {
    const int out = cfg.stage_channels[s];
    for (int b = 0; b < cfg.stage_blocks[s]; ++b) {
      const int stride = b == 0 ? strides[s] : 1;
      if (cfg.bottleneck) {
        const int m = out / 4;
        total += conv_params(in, m, 1) + bn_params(m) + conv_params(m, m, 3) +
                 bn_params(m) + conv_params(m, out, 1) + bn_params(out);
      } else {
        total += conv_params(in, out, 3) + bn_params(out) +
                 conv_params(out, out, 3) + bn_params(out);
      }
      if (in != out || stride != 1) total += conv_params(in, out, 1) + bn_params(out);
      in = out;
    }
  }
  return total;
}

TEST(Backbone, ToyParameterCountMatchesLayout) {
  ModelGraph g(1);
  Backbone bb(g, BackboneConfig::toy());
  EXPECT_EQ(g.count_params({"backbone"}), expected_backbone_params(BackboneConfig::toy(), 3));
  EXPECT_EQ(g.count_params({"backbone"}), 309080u);
}

TEST(Backbone, Resnet50ParameterCountMatchesLayout) {
  ModelGraph g(1);
  Backbone bb(g, BackboneConfig::resnet50());
  const std::size_t n = g.count_params({"backbone"});
  EXPECT_EQ(n, expected_backbone_params(BackboneConfig::resnet50(), 3));
  EXPECT_NEAR(static_cast<double>(n), 23.6e6, 0.05 * 23.6e6);
}

TEST(Backbone, BlockProjectionsAppearOnlyWhenShapeChanges) {
  ModelGraph g(1);
  BackboneConfig cfg = BackboneConfig::toy();
  cfg.stage_blocks = {2, 2, 1, 1};
  cfg.stage_channels = {16, 32, 32, 64};
  Backbone bb(g, cfg);
  EXPECT_FALSE(bb.block(0, 0).projection.has_value());  // 16 -> 16, stride 1
  EXPECT_FALSE(bb.block(0, 1).projection.has_value());
  EXPECT_TRUE(bb.block(1, 0).projection.has_value());   // stride 2
  EXPECT_FALSE(bb.block(1, 1).projection.has_value());
  EXPECT_FALSE(bb.block(2, 0).projection.has_value());  // dilated, same width
  EXPECT_TRUE(bb.block(3, 0).projection.has_value());
  EXPECT_EQ(bb.block(3, 0).branch_layers[0].conv.opts.dilation, 4);
  EXPECT_EQ(bb.block(2, 0).branch_layers[1].conv.opts.dilation, 2);
}

struct ExtentCase {
  int h, w;
};

class BackboneExtent : public ::testing::TestWithParam<ExtentCase> {};

TEST_P(BackboneExtent, StridesFourAndEight) {
  const auto [h, w] = GetParam();
  ModelGraph g(2);
  Backbone bb(g, BackboneConfig::toy());
  Tape tape;
  BackboneOutputs out = bb.forward(tape.constant(Tensor({1, 3, h, w}, 0.5)), BnMode::kEval);
  EXPECT_EQ(out.low_level.shape(), (Shape{1, 16, ceil_div(h, 4), ceil_div(w, 4)}));
  EXPECT_EQ(out.c3.shape(), (Shape{1, 64, ceil_div(h, 8), ceil_div(w, 8)}));
  EXPECT_EQ(out.shared.shape(), (Shape{1, 128, ceil_div(h, 8), ceil_div(w, 8)}));
}

INSTANTIATE_TEST_SUITE_P(Extents, BackboneExtent,
                         ::testing::Values(ExtentCase{64, 64}, ExtentCase{65, 65},
                                           ExtentCase{32, 47}, ExtentCase{71, 33}),
                         [](const ::testing::TestParamInfo<ExtentCase>& info) {
                           return std::to_string(info.param.h) + "x" +
                                  std::to_string(info.param.w);
                         });

TEST(Backbone, RejectsInputsBelowMinimum) {
  ModelGraph g(2);
  Backbone bb(g, BackboneConfig::toy());
  Tape tape;
  EXPECT_THROW(bb.forward(tape.constant(Tensor({1, 3, 31, 64})), BnMode::kEval), ShapeError);
  EXPECT_THROW(bb.forward(tape.constant(Tensor({1, 3, 64, 16})), BnMode::kEval), ShapeError);
}

// Width of the input region that influences the centre shared feature,
// measured from the input gradient.
int receptive_extent(const BackboneConfig& cfg) {
  ModelGraph g(3);
  Backbone bb(g, cfg);
  Parameter image;
  image.name = "image";
  std::mt19937_64 rng(4);
  image.value = testing::random_tensor({1, 3, 288, 288}, rng);
  image.zero_grad();
  Tape tape;
  BackboneOutputs out = bb.forward(tape.param(image), BnMode::kEval);
  const Shape s = out.shared.shape();
  Tensor pick(s);
  for (int c = 0; c < s.c; ++c) pick.at(0, c, s.h / 2, s.w / 2) = 1.0;
  tape.backward(inner_product(out.shared, pick));
  int lo = 288, hi = -1;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 288; ++y) {
      for (int x = 0; x < 288; ++x) {
        if (image.grad.at(0, c, y, x) != 0.0) {
          lo = std::min(lo, x);
          hi = std::max(hi, x);
        }
      }
    }
  }
  return hi - lo + 1;
}

TEST(Backbone, DilationWidensReceptiveField) {
  BackboneConfig dilated = BackboneConfig::toy();
  BackboneConfig plain = dilated;
  plain.dilations = {1, 1, 1, 1};
  const int wide = receptive_extent(dilated);
  const int narrow = receptive_extent(plain);
  EXPECT_GT(wide, narrow);
  // Stages 3 and 4 at stride 8 add 2 * 8 * d per 3x3 conv.
  EXPECT_EQ(wide - narrow, 2 * 8 * (2 * (2 - 1) + 2 * (4 - 1)));
}

}  // namespace
}  // namespace canet

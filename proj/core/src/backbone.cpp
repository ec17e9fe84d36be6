#include "canet/backbone.hpp"

#include <string>

#include "canet/errors.hpp"

namespace canet {
namespace {

constexpr std::array<int, 4> kStageStrides{1, 2, 1, 1};
constexpr const char* kComponent = "backbone";

Conv2dOptions conv3x3(int stride, int dilation) {
  return Conv2dOptions{stride, dilation, dilation, 1};
}

ResidualBlock make_block(ModelGraph& g, const std::string& name, int in,
                         int out, int stride, int dilation, bool bottleneck) {
  ResidualBlock block;
  if (bottleneck) {
    const int mid = std::max(1, out / 4);
    block.branch_layers.push_back(
        make_conv_bn_act(g, name + ".conv1", kComponent, in, mid, 1));
    block.branch_layers.push_back(make_conv_bn_act(
        g, name + ".conv2", kComponent, mid, mid, 3, conv3x3(stride, dilation)));
    block.branch_layers.push_back(make_conv_bn_act(
        g, name + ".conv3", kComponent, mid, out, 1, {}, false));
  } else {
    block.branch_layers.push_back(make_conv_bn_act(
        g, name + ".conv1", kComponent, in, out, 3, conv3x3(stride, dilation)));
    block.branch_layers.push_back(make_conv_bn_act(
        g, name + ".conv2", kComponent, out, out, 3, conv3x3(1, dilation),
        false));
  }
  if (in != out || stride != 1) {
    block.projection = make_conv_bn_act(g, name + ".proj", kComponent, in, out,
                                        1, Conv2dOptions{stride, 0, 1, 1},
                                        false);
  }
  return block;
}

}  // namespace

BackboneConfig BackboneConfig::resnet50() { return BackboneConfig{}; }

BackboneConfig BackboneConfig::toy() {
  BackboneConfig cfg;
  cfg.stage_blocks = {1, 1, 1, 1};
  cfg.stem_channels = 16;
  cfg.stage_channels = {16, 32, 64, 128};
  cfg.bottleneck = false;
  return cfg;
}

void BackboneConfig::validate() const {
  for (int i = 0; i < 4; ++i) {
    if (stage_blocks[i] < 1) {
      throw ConfigError("backbone.stage_blocks must be positive");
    }
    if (stage_channels[i] < 1 || dilations[i] < 1) {
      throw ConfigError("backbone channels and dilations must be positive");
    }
  }
  if (stem_channels < 2) throw ConfigError("backbone.stem_channels must be >= 2");
}

Var ResidualBlock::branch(const Var& x, BnMode mode) const {
  Var y = x;
  for (const auto& layer : branch_layers) y = layer(y, mode);
  return y;
}

Var ResidualBlock::operator()(const Var& x, BnMode mode) const {
  Var identity = projection ? (*projection)(x, mode) : x;
  return relu(add(branch(x, mode), identity));
}

Backbone::Backbone(ModelGraph& graph, const BackboneConfig& cfg,
                   int in_channels)
    : cfg_(cfg) {
  cfg_.validate();
  const int mid = cfg_.stem_channels / 2;
  stem_.push_back(make_conv_bn_act(graph, "backbone.stem.0", kComponent,
                                   in_channels, mid, 3, conv3x3(2, 1)));
  stem_.push_back(make_conv_bn_act(graph, "backbone.stem.1", kComponent, mid,
                                   mid, 3, conv3x3(1, 1)));
  stem_.push_back(make_conv_bn_act(graph, "backbone.stem.2", kComponent, mid,
                                   cfg_.stem_channels, 3, conv3x3(1, 1)));

  int channels = cfg_.stem_channels;
  for (int s = 0; s < 4; ++s) {
    for (int b = 0; b < cfg_.stage_blocks[s]; ++b) {
      const std::string name = "backbone.stage" + std::to_string(s + 1) +
                               "." + std::to_string(b);
      const int stride = b == 0 ? kStageStrides[s] : 1;
      stages_[s].push_back(make_block(graph, name, channels,
                                      cfg_.stage_channels[s], stride,
                                      cfg_.dilations[s], cfg_.bottleneck));
      channels = cfg_.stage_channels[s];
    }
  }
}

BackboneOutputs Backbone::forward(const Var& image, BnMode mode) const {
  const Shape s = image.shape();
  if (s.h < kMinInputExtent || s.w < kMinInputExtent) {
    throw ShapeError("backbone input " + std::to_string(s.h) + "x" +
                     std::to_string(s.w) + " is below the minimum " +
                     std::to_string(kMinInputExtent) + "x" +
                     std::to_string(kMinInputExtent));
  }
  auto guard = image.tape().scope("backbone");
  Var x = image;
  for (const auto& layer : stem_) x = layer(x, mode);
  x = avg_pool2d(x, 2);

  BackboneOutputs out;
  for (int st = 0; st < 4; ++st) {
    for (const auto& block : stages_[st]) x = block(x, mode);
    if (st == 0) out.low_level = x;
    if (st == 2) out.c3 = x;
  }
  out.shared = x;
  return out;
}

}  // namespace canet

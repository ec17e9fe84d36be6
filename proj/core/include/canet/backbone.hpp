#pragma once

#include <array>
#include <optional>
#include <vector>

#include "canet/layers.hpp"

namespace canet {

/// Minimum input height/width accepted by the encoder.
inline constexpr int kMinInputExtent = 32;

/// Deep-stem dilated residual encoder layout.
///
/// The stem is three 3x3 convolutions (the first with stride 2) followed by
/// 2x2 average pooling, for stride 4. Stage strides are {1,2,1,1} and stages
/// 3 and 4 are dilated instead of strided, so the final output stride is 8.
struct BackboneConfig {
  std::array<int, 4> stage_blocks{3, 4, 6, 3};
  int stem_channels = 128;
  std::array<int, 4> stage_channels{256, 512, 1024, 2048};
  std::array<int, 4> dilations{1, 1, 2, 4};
  bool bottleneck = true;

  /// 50-layer bottleneck layout with a 64-64-128 deep stem.
  static BackboneConfig resnet50();
  /// One basic block per stage, channels {16,32,64,128}.
  static BackboneConfig toy();
  void validate() const;
};

struct BackboneOutputs {
  Var low_level;  ///< stage 1, stride 4
  Var c3;         ///< stage 3, stride 8 (auxiliary tap)
  Var shared;     ///< stage 4, stride 8
};

/// Residual block: ReLU(branch(x) + identity(x)), where identity is a
/// strided 1x1 projection whenever the shape changes.
struct ResidualBlock {
  std::vector<ConvBnAct> branch_layers;  ///< last one has no ReLU
  std::optional<ConvBnAct> projection;

  Var branch(const Var& x, BnMode mode) const;
  Var operator()(const Var& x, BnMode mode) const;
};

class Backbone {
 public:
  Backbone(ModelGraph& graph, const BackboneConfig& cfg, int in_channels = 3);

  BackboneOutputs forward(const Var& image, BnMode mode) const;

  const BackboneConfig& config() const { return cfg_; }
  int low_level_channels() const { return cfg_.stage_channels[0]; }
  int c3_channels() const { return cfg_.stage_channels[2]; }
  int shared_channels() const { return cfg_.stage_channels[3]; }
  const ResidualBlock& block(int stage, int index) const {
    return stages_.at(stage).at(index);
  }

 private:
  BackboneConfig cfg_;
  std::vector<ConvBnAct> stem_;
  std::array<std::vector<ResidualBlock>, 4> stages_;
};

}  // namespace canet

#pragma once

#include "canet/layers.hpp"

namespace canet {

struct DecoderConfig {
  int low_level_channels_out = 48;
  int fuse_channels = 256;
  int num_classes = 5;

  void validate() const;
};

/// Asymmetric decoder: 3x3 low-level projection, x2 context up-sampling,
/// concat, two 3x3 fuse convolutions, 1x1 classifier, bilinear to (H, W).
class Decoder {
 public:
  Decoder(ModelGraph& g, const DecoderConfig& cfg, int low_level_channels,
          int context_channels);

  /// low_level is stride 4 and context stride 8, i.e. the low-level extent
  /// must ceil-halve to the context extent.
  Var operator()(const Var& low_level, const Var& context, int out_h,
                 int out_w, BnMode mode) const;

  const DecoderConfig& config() const { return cfg_; }

 private:
  DecoderConfig cfg_;
  ConvBnAct low_proj_;
  ConvBnAct fuse1_;
  ConvBnAct fuse2_;
  ConvLayer classifier_;
};

/// Training-only auxiliary classifier on the stage-3 features: a 3x3
/// convolution to K classes, bilinearly resized to the label extent.
class AuxHead {
 public:
  AuxHead(ModelGraph& g, int in_channels, int num_classes);
  Var operator()(const Var& c3, int out_h, int out_w) const;

 private:
  ConvLayer classifier_;
};

}  // namespace canet

#pragma once

#include <string>

#include "canet/model_graph.hpp"
#include "canet/ops.hpp"

namespace canet {

struct ConvLayer {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
  Conv2dOptions opts;

  Var operator()(const Var& x) const;
};

struct BatchNormLayer {
  Parameter* scale = nullptr;
  Parameter* shift = nullptr;
  BatchNormState* state = nullptr;

  Var operator()(const Var& x, BnMode mode) const;
};

/// conv -> batch norm -> optional ReLU.
struct ConvBnAct {
  ConvLayer conv;
  BatchNormLayer bn;
  bool relu = true;

  Var operator()(const Var& x, BnMode mode) const;
};

/// He-initialized k x k convolution "<name>.weight" (+ "<name>.bias", zero).
ConvLayer make_conv(ModelGraph& g, const std::string& name,
                    const std::string& component, int in_channels,
                    int out_channels, int kernel, Conv2dOptions opts = {},
                    bool bias = false);

/// Batch norm with scale 1 / shift 0; both exempt from weight decay.
BatchNormLayer make_batch_norm(ModelGraph& g, const std::string& name,
                               const std::string& component, int channels);

ConvBnAct make_conv_bn_act(ModelGraph& g, const std::string& name,
                           const std::string& component, int in_channels,
                           int out_channels, int kernel, Conv2dOptions opts = {},
                           bool relu = true);

}  // namespace canet

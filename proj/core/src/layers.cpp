#include "canet/layers.hpp"

namespace canet {

Var ConvLayer::operator()(const Var& x) const {
  Tape& t = x.tape();
  std::optional<Var> b;
  if (bias != nullptr) b = t.param(*bias);
  return conv2d(x, t.param(*weight), b, opts);
}

Var BatchNormLayer::operator()(const Var& x, BnMode mode) const {
  Tape& t = x.tape();
  return batch_norm(x, t.param(*scale), t.param(*shift), *state, mode);
}

Var ConvBnAct::operator()(const Var& x, BnMode mode) const {
  Var y = bn(conv(x), mode);
  return relu ? canet::relu(y) : y;
}

ConvLayer make_conv(ModelGraph& g, const std::string& name,
                    const std::string& component, int in_channels,
                    int out_channels, int kernel, Conv2dOptions opts,
                    bool bias) {
  ConvLayer layer;
  layer.opts = opts;
  layer.weight = &g.add_parameter(
      name + ".weight", component,
      Shape{out_channels, in_channels / opts.groups, kernel, kernel});
  init_he_fan_out(*layer.weight, g.rng());
  if (bias) {
    layer.bias = &g.add_parameter(name + ".bias", component,
                                  Shape{1, out_channels, 1, 1}, true);
  }
  return layer;
}

BatchNormLayer make_batch_norm(ModelGraph& g, const std::string& name,
                               const std::string& component, int channels) {
  BatchNormLayer layer;
  layer.scale = &g.add_parameter(name + ".scale", component,
                                 Shape{1, channels, 1, 1}, true);
  layer.scale->value.fill(1.0);
  layer.shift = &g.add_parameter(name + ".shift", component,
                                 Shape{1, channels, 1, 1}, true);
  layer.state = &g.add_batch_norm_state(name + ".running", component, channels);
  return layer;
}

ConvBnAct make_conv_bn_act(ModelGraph& g, const std::string& name,
                           const std::string& component, int in_channels,
                           int out_channels, int kernel, Conv2dOptions opts,
                           bool relu) {
  ConvBnAct block;
  block.conv = make_conv(g, name + ".conv", component, in_channels,
                         out_channels, kernel, opts);
  block.bn = make_batch_norm(g, name + ".bn", component, out_channels);
  block.relu = relu;
  return block;
}

}  // namespace canet

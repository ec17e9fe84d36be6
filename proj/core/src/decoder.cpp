#include "canet/decoder.hpp"

#include "canet/errors.hpp"

namespace canet {
namespace {

constexpr Conv2dOptions kSame3x3{1, 1, 1, 1};

}  // namespace

void DecoderConfig::validate() const {
  if (num_classes < 2) throw ConfigError("decoder.num_classes must be >= 2");
  if (low_level_channels_out < 1 || fuse_channels < 1) {
    throw ConfigError("decoder channel counts must be positive");
  }
}

Decoder::Decoder(ModelGraph& g, const DecoderConfig& cfg,
                 int low_level_channels, int context_channels)
    : cfg_(cfg) {
  cfg_.validate();
  low_proj_ = make_conv_bn_act(g, "decoder.low_proj", "decoder",
                               low_level_channels, cfg_.low_level_channels_out,
                               3, kSame3x3);
  fuse1_ = make_conv_bn_act(g, "decoder.fuse1", "decoder",
                            context_channels + cfg_.low_level_channels_out,
                            cfg_.fuse_channels, 3, kSame3x3);
  fuse2_ = make_conv_bn_act(g, "decoder.fuse2", "decoder", cfg_.fuse_channels,
                            cfg_.fuse_channels, 3, kSame3x3);
  classifier_ = make_conv(g, "decoder.classifier", "decoder",
                          cfg_.fuse_channels, cfg_.num_classes, 1, {}, true);
}

Var Decoder::operator()(const Var& low_level, const Var& context, int out_h,
                        int out_w, BnMode mode) const {
  const Shape ls = low_level.shape();
  const Shape cs = context.shape();
  if (ceil_div(ls.h, 2) != cs.h || ceil_div(ls.w, 2) != cs.w) {
    throw ShapeError("decoder: low-level extent " + std::to_string(ls.h) + "x" +
                     std::to_string(ls.w) + " is not 2x the context extent " +
                     std::to_string(cs.h) + "x" + std::to_string(cs.w));
  }
  auto scope = low_level.tape().scope("decoder");
  Var low = low_proj_(low_level, mode);
  Var ctx = bilinear_upsample(context, ls.h, ls.w);
  Var x = concat_channels({ctx, low});
  x = fuse2_(fuse1_(x, mode), mode);
  return bilinear_upsample(classifier_(x), out_h, out_w);
}

AuxHead::AuxHead(ModelGraph& g, int in_channels, int num_classes)
    : classifier_(make_conv(g, "aux.classifier", "aux", in_channels,
                            num_classes, 3, kSame3x3, true)) {}

Var AuxHead::operator()(const Var& c3, int out_h, int out_w) const {
  auto scope = c3.tape().scope("aux");
  return bilinear_upsample(classifier_(c3), out_h, out_w);
}

}  // namespace canet

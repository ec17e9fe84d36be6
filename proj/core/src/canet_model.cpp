#include "canet/canet_model.hpp"

namespace canet {

CanetConfig CanetConfig::toy(int num_classes) {
  CanetConfig cfg;
  cfg.backbone = BackboneConfig::toy();
  cfg.cam.scales = {2, 4};
  cfg.cam.width = 64;
  cfg.cam.fsm_channels = 64;
  cfg.decoder.fuse_channels = 64;
  cfg.decoder.num_classes = num_classes;
  return cfg;
}

CanetConfig CanetConfig::resnet50(int num_classes) {
  CanetConfig cfg;
  cfg.decoder.num_classes = num_classes;
  return cfg;
}

CanetModel::CanetModel(const CanetConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), graph_(std::make_unique<ModelGraph>(seed)) {
  backbone_ = std::make_unique<Backbone>(*graph_, cfg_.backbone, cfg_.in_channels);
  cam_ = std::make_unique<Cam>(*graph_, cfg_.cam, backbone_->shared_channels());
  if (cfg_.use_decoder) {
    decoder_ = std::make_unique<Decoder>(*graph_, cfg_.decoder,
                                         backbone_->low_level_channels(),
                                         cam_->out_channels());
  } else {
    cfg_.decoder.validate();
    head_ = std::make_unique<ConvLayer>(
        make_conv(*graph_, "head.classifier", "decoder", cam_->out_channels(),
                  cfg_.decoder.num_classes, 1, {}, true));
  }
  if (cfg_.use_aux) {
    aux_ = std::make_unique<AuxHead>(*graph_, backbone_->c3_channels(),
                                     cfg_.decoder.num_classes);
  }
}

CanetOutputs CanetModel::forward(const Var& image, BnMode mode,
                                 std::optional<bool> with_aux) const {
  const int h = image.shape().h;
  const int w = image.shape().w;
  CanetOutputs out;
  out.features = backbone_->forward(image, mode);
  out.context = cam_->forward(out.features.shared, mode);
  if (decoder_) {
    out.logits = (*decoder_)(out.features.low_level, out.context, h, w, mode);
  } else {
    auto scope = image.tape().scope("decoder");
    out.logits = bilinear_upsample((*head_)(out.context), h, w);
  }
  if (aux_ && with_aux.value_or(mode == BnMode::kTrain)) {
    out.aux_logits = (*aux_)(out.features.c3, h, w);
  }
  return out;
}

Tensor CanetModel::infer_logits(const Tensor& image) const {
  Tape tape;
  Var x = tape.constant(image);
  return forward(x, BnMode::kEval, false).logits.value();
}

}  // namespace canet

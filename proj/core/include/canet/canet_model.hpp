#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include "canet/backbone.hpp"
#include "canet/cam.hpp"
#include "canet/decoder.hpp"

namespace canet {

struct CanetConfig {
  BackboneConfig backbone;
  CamConfig cam;
  DecoderConfig decoder;
  int in_channels = 3;
  /// Without the decoder a 1x1 classifier on the contexts is resized
  /// straight to the input extent.
  bool use_decoder = true;
  bool use_aux = true;

  /// Toy layout: toy backbone, CFs {2,4}, width 64, 64-channel FSM and
  /// decoder fuse convolutions.
  static CanetConfig toy(int num_classes = 5);
  /// 50-layer backbone, CFs {2,4,8,16}, width 512, 256-channel FSM.
  static CanetConfig resnet50(int num_classes = 21);
};

struct CanetOutputs {
  Var logits;                    ///< (N,K,H,W)
  std::optional<Var> aux_logits; ///< present only when requested
  BackboneOutputs features;
  Var context;                   ///< re-fused contexts from the CAM
};

/// Backbone + CAM + decoder + auxiliary head over one ModelGraph.
class CanetModel {
 public:
  CanetModel(const CanetConfig& cfg, std::uint64_t seed);
  CanetModel(CanetModel&&) noexcept = default;
  CanetModel& operator=(CanetModel&&) noexcept = default;

  /// The auxiliary head runs only when `with_aux` is set; it defaults to on
  /// in train mode and off in eval mode. Models built without the head never
  /// produce auxiliary logits.
  CanetOutputs forward(const Var& image, BnMode mode,
                       std::optional<bool> with_aux = std::nullopt) const;

  /// Eval-mode logits for a batch, on a private tape.
  Tensor infer_logits(const Tensor& image) const;

  ModelGraph& graph() { return *graph_; }
  const ModelGraph& graph() const { return *graph_; }
  const CanetConfig& config() const { return cfg_; }
  const Backbone& backbone() const { return *backbone_; }
  const Cam& cam() const { return *cam_; }
  int num_classes() const { return cfg_.decoder.num_classes; }

 private:
  CanetConfig cfg_;
  std::unique_ptr<ModelGraph> graph_;
  std::unique_ptr<Backbone> backbone_;
  std::unique_ptr<Cam> cam_;
  std::unique_ptr<Decoder> decoder_;
  std::unique_ptr<ConvLayer> head_;
  std::unique_ptr<AuxHead> aux_;
};

}  // namespace canet

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "canet/canet_model.hpp"
#include "canet/checkpoint.hpp"
#include "canet/dataset.hpp"
#include "canet/metrics.hpp"
#include "canet/train_config.hpp"

namespace canet {

/// Receives each metric-log line as it is produced.
using LogSink = std::function<void(const std::string&)>;

struct TrainResult {
  Checkpoint checkpoint;
  /// key=value lines: "event=train ..." every log_every iterations,
  /// "event=eval ..." every eval_every iterations, "event=warning ...".
  std::vector<std::string> log;
  double final_loss = 0.0;  ///< joint loss of the last iteration, 0 if none
};

/// Momentum SGD with the poly schedule and the joint loss. Deterministic in
/// cfg.seed. Periodic evaluation uses `eval_data` when given, the training
/// set otherwise. Throws DivergenceError on a non-finite loss.
TrainResult train(CanetModel& model, const Dataset& data,
                  const TrainConfig& cfg, const std::string& config_text = {},
                  const LogSink& sink = {}, const Dataset* eval_data = nullptr);

/// Class probabilities (1,K,H,W) averaged over rescaled and optionally
/// mirrored eval-mode forwards, each resized back to the input extent.
Tensor tta_probabilities(const CanetModel& model, const Tensor& image,
                         const std::vector<double>& scales, bool flip);

struct EvalResult {
  double pixel_accuracy = 0.0;
  IouResult iou;
  ConfusionMatrix confusion{2};
};

EvalResult evaluate(const CanetModel& model, const Dataset& data,
                    const std::vector<double>& scales = {1.0},
                    bool flip = false,
                    ClassPolicy policy = ClassPolicy::kExcludeAbsent);

}  // namespace canet

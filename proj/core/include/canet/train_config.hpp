#pragma once

#include <cstdint>
#include <vector>

namespace canet {

/// Optimization, schedule, augmentation and loss-weight settings.
struct TrainConfig {
  double base_lr = 1e-2;
  double power = 0.9;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  long total_iters = 300;
  int batch_size = 4;
  double lambda_aux = 0.1;
  int crop = 64;
  std::uint64_t seed = 1;
  std::vector<double> eval_scales{1.0};
  bool eval_flip = false;

  bool augment = true;
  double flip_prob = 0.5;
  double scale_min = 0.5;
  double scale_max = 2.0;
  double blur_sigma_max = 1.5;

  int log_every = 1;   ///< train-event cadence in iterations
  int eval_every = 0;  ///< 0 disables periodic evaluation

  /// 0 < power, 0 <= momentum < 1, total_iters >= 0, batch_size >= 1.
  void validate() const;
};

}  // namespace canet

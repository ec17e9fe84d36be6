#pragma once

#include "canet/ops.hpp"

namespace canet {

/// Auxiliary-loss weight used in training unless configured otherwise.
inline constexpr double kDefaultAuxWeight = 0.1;

struct LossReport {
  double principal = 0.0;
  double auxiliary = 0.0;
  double total = 0.0;  ///< principal + lambda * auxiliary
  double lambda = 0.0;
};

struct JointLoss {
  Var total;
  LossReport report;
};

/// Cross-entropy on the decoder output plus lambda times cross-entropy on
/// the auxiliary output.
JointLoss joint_loss(const Var& decoder_logits, const Var& aux_logits,
                     const LabelMap& labels, double lambda,
                     int ignore_index = kIgnoreIndex);

}  // namespace canet

#include "canet/loss.hpp"

#include "canet/errors.hpp"

namespace canet {

JointLoss joint_loss(const Var& decoder_logits, const Var& aux_logits,
                     const LabelMap& labels, double lambda, int ignore_index) {
  if (decoder_logits.shape() != aux_logits.shape()) {
    throw ShapeError("joint_loss: decoder logits " +
                     decoder_logits.shape().str() + " vs auxiliary logits " +
                     aux_logits.shape().str());
  }
  Var principal = softmax_cross_entropy(decoder_logits, labels, ignore_index);
  Var auxiliary = softmax_cross_entropy(aux_logits, labels, ignore_index);
  JointLoss out;
  out.total = add(principal, scalar_scale(auxiliary, lambda));
  out.report.principal = principal.value()[0];
  out.report.auxiliary = auxiliary.value()[0];
  out.report.total = out.total.value()[0];
  out.report.lambda = lambda;
  return out;
}

}  // namespace canet

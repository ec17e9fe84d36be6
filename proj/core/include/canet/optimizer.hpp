#pragma once

#include <string>
#include <unordered_map>

#include "canet/model_graph.hpp"

namespace canet {

/// base_lr * (1 - iter / total_iters)^power. Requires 0 <= iter <= total.
double poly_lr(double base_lr, long iter, long total_iters, double power);

/// One momentum-SGD update with coupled L2 weight decay:
///   v <- momentum * v + (g + wd * w);  w <- w - lr * v
/// Weight decay is skipped for weight_decay_exempt parameters.
void sgd_update(Parameter& p, Tensor& velocity, double lr, double momentum,
                double weight_decay);

/// Applies sgd_update to every trainable parameter of a graph, keeping one
/// velocity buffer per parameter name.
class SgdOptimizer {
 public:
  SgdOptimizer(double momentum, double weight_decay)
      : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(ModelGraph& graph, double lr);

  std::unordered_map<std::string, Tensor>& velocities() { return velocity_; }
  const std::unordered_map<std::string, Tensor>& velocities() const {
    return velocity_;
  }
  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }

 private:
  double momentum_;
  double weight_decay_;
  std::unordered_map<std::string, Tensor> velocity_;
};

}  // namespace canet

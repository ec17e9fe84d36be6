#include "canet/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "canet/errors.hpp"

namespace canet {

double poly_lr(double base_lr, long iter, long total_iters, double power) {
  if (total_iters <= 0) {
    throw std::domain_error("poly_lr: total_iters must be positive");
  }
  if (iter < 0 || iter > total_iters) {
    throw std::domain_error("poly_lr: iteration " + std::to_string(iter) +
                            " outside [0," + std::to_string(total_iters) + "]");
  }
  return base_lr * std::pow(1.0 - static_cast<double>(iter) / total_iters,
                            power);
}

void sgd_update(Parameter& p, Tensor& velocity, double lr, double momentum,
                double weight_decay) {
  if (p.grad.shape() != p.value.shape()) {
    throw ShapeError("sgd: gradient shape " + p.grad.shape().str() +
                     " does not match parameter '" + p.name + "' " +
                     p.value.shape().str());
  }
  if (velocity.empty()) velocity = Tensor(p.value.shape());
  if (velocity.shape() != p.value.shape()) {
    throw ShapeError("sgd: momentum buffer shape mismatch for '" + p.name + "'");
  }
  const double wd = p.weight_decay_exempt ? 0.0 : weight_decay;
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    velocity[i] = momentum * velocity[i] + (p.grad[i] + wd * p.value[i]);
    p.value[i] -= lr * velocity[i];
  }
}

void SgdOptimizer::step(ModelGraph& graph, double lr) {
  for (Parameter& p : graph.parameters()) {
    if (!p.trainable) continue;
    sgd_update(p, velocity_[p.name], lr, momentum_, weight_decay_);
  }
}

}  // namespace canet

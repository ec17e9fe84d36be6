#pragma once

#include <string>
#include <vector>

#include "canet/tensor.hpp"

namespace canet {

/// A named learnable tensor together with its accumulated gradient.
struct Parameter {
  std::string name;
  std::string component;  ///< "backbone", "cam", "fsm", "decoder" or "aux"
  Tensor value;
  Tensor grad;
  bool trainable = true;
  bool weight_decay_exempt = false;

  std::size_t numel() const { return value.size(); }
  void zero_grad() { grad = Tensor(value.shape()); }
};

/// Running statistics of one batch-norm layer.
struct BatchNormState {
  std::string name;
  std::string component;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  explicit BatchNormState(std::string name_ = {}, std::string component_ = {},
                          int channels = 0)
      : name(std::move(name_)),
        component(std::move(component_)),
        running_mean(channels, 0.0),
        running_var(channels, 1.0) {}
};

}  // namespace canet

#include "canet/model_graph.hpp"

#include <algorithm>
#include <cmath>

#include "canet/errors.hpp"

namespace canet {

void ModelGraph::claim_name(const std::string& name) {
  if (std::find(names_.begin(), names_.end(), name) != names_.end()) {
    throw ConfigError("duplicate parameter name '" + name + "'");
  }
  names_.push_back(name);
}

Parameter& ModelGraph::add_parameter(std::string name, std::string component,
                                     Shape shape, bool weight_decay_exempt) {
  claim_name(name);
  Parameter p;
  p.name = std::move(name);
  p.component = std::move(component);
  p.value = Tensor(shape);
  p.grad = Tensor(shape);
  p.weight_decay_exempt = weight_decay_exempt;
  params_.push_back(std::move(p));
  return params_.back();
}

BatchNormState& ModelGraph::add_batch_norm_state(std::string name,
                                                 std::string component,
                                                 int channels) {
  claim_name(name);
  states_.emplace_back(std::move(name), std::move(component), channels);
  return states_.back();
}

Parameter* ModelGraph::find(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Parameter* ModelGraph::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

BatchNormState* ModelGraph::find_state(std::string_view name) {
  for (auto& s : states_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

void ModelGraph::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::size_t ModelGraph::count_params(
    const std::vector<std::string>& components) const {
  std::size_t total = 0;
  for (const auto& p : params_) {
    if (!p.trainable) continue;
    if (!components.empty() &&
        std::find(components.begin(), components.end(), p.component) ==
            components.end()) {
      continue;
    }
    total += p.numel();
  }
  return total;
}

void init_he_fan_out(Parameter& p, std::mt19937_64& rng) {
  const Shape s = p.value.shape();
  const double fan_out = static_cast<double>(s.n) * s.h * s.w;
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_out));
  for (double& v : p.value.data()) v = dist(rng);
}

}  // namespace canet

#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "canet/parameter.hpp"

namespace canet {

/// Ordered, uniquely named parameters and batch-norm states of a network.
/// Element addresses are stable for the graph's lifetime.
class ModelGraph {
 public:
  explicit ModelGraph(std::uint64_t seed = 0) : rng_(seed) {}
  ModelGraph(const ModelGraph&) = delete;
  ModelGraph& operator=(const ModelGraph&) = delete;

  Parameter& add_parameter(std::string name, std::string component,
                           Shape shape, bool weight_decay_exempt = false);
  BatchNormState& add_batch_norm_state(std::string name, std::string component,
                                       int channels);

  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;
  BatchNormState* find_state(std::string_view name);

  std::deque<Parameter>& parameters() { return params_; }
  const std::deque<Parameter>& parameters() const { return params_; }
  std::deque<BatchNormState>& batch_norm_states() { return states_; }
  const std::deque<BatchNormState>& batch_norm_states() const {
    return states_;
  }

  void zero_grad();
  /// Trainable element count, restricted to `components` when non-empty.
  std::size_t count_params(const std::vector<std::string>& components = {}) const;

  std::mt19937_64& rng() { return rng_; }

 private:
  void claim_name(const std::string& name);

  std::deque<Parameter> params_;
  std::deque<BatchNormState> states_;
  std::vector<std::string> names_;
  std::mt19937_64 rng_;
};

/// He normal initialization with fan-out = C_out * k * k.
void init_he_fan_out(Parameter& p, std::mt19937_64& rng);

}  // namespace canet

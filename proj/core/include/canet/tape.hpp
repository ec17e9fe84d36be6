#pragma once

#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "canet/parameter.hpp"
#include "canet/tensor.hpp"

namespace canet {

class Tape;
struct TapeNode;

/// Backward rule of a recorded op: reads self.grad and pushes contributions
/// into the inputs' gradient sinks.
using BackwardFn = std::function<void(Tape&, const TapeNode& self)>;

struct TapeNode {
  int id = -1;
  std::string op;
  std::string scope;
  std::vector<int> inputs;
  Tensor value;
  Tensor grad;  ///< empty until a gradient reaches this node
  bool requires_grad = false;
  BackwardFn backward;
  Parameter* param = nullptr;  ///< set for parameter leaves
};

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr && id_ >= 0; }
  int id() const { return id_; }
  Tape& tape() const { return *tape_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Dynamic computation record for reverse-mode differentiation.
///
/// Nodes are appended in execution order, so reverse id order is a valid
/// topological order for the backward sweep. Each node is visited once;
/// fan-out is handled by accumulating into the node gradient before its
/// own backward rule runs.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records a non-differentiable input.
  Var constant(Tensor value, std::string_view op = "input");
  /// Leaf for a Parameter. One node per Parameter per tape.
  Var param(Parameter& p);
  /// Records an op output. The node requires a gradient iff any input does.
  Var record(std::string_view op, const std::vector<Var>& inputs, Tensor value,
             BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and sweeps backward, adding into the grad of
  /// every trainable Parameter on the tape. Node gradients from a previous
  /// sweep are discarded first; Parameter gradients accumulate.
  void backward(const Var& loss);

  /// Gradient buffer of node id, zero-initialized on first use, or nullptr
  /// when the node does not require a gradient.
  Tensor* grad_sink(int id);

  const TapeNode& node(int id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }
  const std::deque<TapeNode>& nodes() const { return nodes_; }

  class ScopeGuard {
   public:
    ScopeGuard(Tape& tape, std::string name);
    ~ScopeGuard();
    ScopeGuard(const ScopeGuard&) = delete;
    ScopeGuard& operator=(const ScopeGuard&) = delete;

   private:
    Tape& tape_;
  };
  /// Names subsequently recorded nodes "outer/inner/..." until destroyed.
  [[nodiscard]] ScopeGuard scope(std::string name) {
    return ScopeGuard(*this, std::move(name));
  }
  const std::string& current_scope() const { return scope_path_; }

 private:
  std::deque<TapeNode> nodes_;
  std::vector<std::size_t> scope_marks_;
  std::string scope_path_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

}  // namespace canet

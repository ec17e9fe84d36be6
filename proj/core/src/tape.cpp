#include "canet/tape.hpp"

#include "canet/errors.hpp"

namespace canet {

const Tensor& Var::value() const { return tape_->node(id_).value; }

bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

Var Tape::constant(Tensor value, std::string_view op) {
  TapeNode node;
  node.id = static_cast<int>(nodes_.size());
  node.op = op;
  node.scope = scope_path_;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.back().id);
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  TapeNode node;
  node.id = static_cast<int>(nodes_.size());
  node.op = "param";
  node.scope = p.name;
  node.value = p.value;
  node.requires_grad = p.trainable;
  node.param = &p;
  nodes_.push_back(std::move(node));
  param_nodes_.emplace(&p, nodes_.back().id);
  return Var(this, nodes_.back().id);
}

Var Tape::record(std::string_view op, const std::vector<Var>& inputs,
                 Tensor value, BackwardFn backward) {
  TapeNode node;
  node.id = static_cast<int>(nodes_.size());
  node.op = op;
  node.scope = scope_path_;
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (&in.tape() != this) {
      throw ShapeError(std::string(op) + ": input recorded on another tape");
    }
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || in.requires_grad();
  }
  node.value = std::move(value);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.back().id);
}

Tensor* Tape::grad_sink(int id) {
  TapeNode& node = nodes_.at(id);
  if (!node.requires_grad) return nullptr;
  if (node.grad.empty()) node.grad = Tensor(node.value.shape());
  return &node.grad;
}

void Tape::backward(const Var& loss) {
  if (&loss.tape() != this) throw ShapeError("backward: foreign tape");
  if (loss.value().size() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " +
                     loss.shape().str());
  }
  for (auto& node : nodes_) node.grad = Tensor();
  if (!nodes_.at(loss.id()).requires_grad) return;
  grad_sink(loss.id())->fill(1.0);

  for (int id = loss.id(); id >= 0; --id) {
    TapeNode& node = nodes_[id];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.param != nullptr) {
      if (node.param->grad.shape() != node.param->value.shape()) {
        node.param->zero_grad();
      }
      node.param->grad.add_inplace(node.grad);
    } else if (node.backward) {
      node.backward(*this, node);
    }
  }
}

Tape::ScopeGuard::ScopeGuard(Tape& tape, std::string name) : tape_(tape) {
  tape_.scope_marks_.push_back(tape_.scope_path_.size());
  if (!tape_.scope_path_.empty()) tape_.scope_path_ += '/';
  tape_.scope_path_ += name;
}

Tape::ScopeGuard::~ScopeGuard() {
  tape_.scope_path_.resize(tape_.scope_marks_.back());
  tape_.scope_marks_.pop_back();
}

}  // namespace canet

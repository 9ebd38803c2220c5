#include "factoreeg/tape.hpp"

#include <algorithm>

#include "factoreeg/error.hpp"

namespace factoreeg {

const Tensor& Var::value() const {
  if (!tape_) throw Error("use of an unbound Var");
  return tape_->value(*this);
}

bool Var::requires_grad() const {
  if (!tape_) throw Error("use of an unbound Var");
  return tape_->requires_grad(*this);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.op = "leaf";
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  Node node;
  node.op = op;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw Error("tensor is not recorded on this tape");
  }
}

void Tape::backward(Var loss) {
  check_owned(loss);
  Node& root = nodes_[loss.id()];
  if (root.value.numel() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + shape_str(root.value.shape));
  }
  backward_visits_ = 0;
  if (!root.requires_grad) return;
  grad_of(loss)[0] += 1.0;

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty() || !node.backward) continue;
    // The closure may grow other nodes' buffers but never this one, so the span stays valid.
    node.backward(*this, std::span<const double>(node.grad));
    ++backward_visits_;
  }
}

Tensor Tape::grad(Var v) const {
  check_owned(v);
  const Node& node = nodes_[v.id()];
  if (node.grad.empty()) return Tensor::zeros(node.value.shape);
  return Tensor(node.value.shape, node.grad);
}

std::span<double> Tape::grad_of(Var v) {
  check_owned(v);
  Node& node = nodes_[v.id()];
  if (node.grad.empty()) node.grad.assign(node.value.numel(), 0.0);
  return node.grad;
}

bool Tape::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id()].requires_grad;
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id()].value;
}

std::string_view Tape::op_name(Var v) const {
  check_owned(v);
  return nodes_[v.id()].op;
}

}  // namespace factoreeg

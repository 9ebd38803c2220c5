#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "factoreeg/tensor.hpp"

namespace factoreeg {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  std::size_t numel() const { return value().numel(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode gradient tape.
///
/// Nodes are appended in execution order, so the node list is already a
/// topological order. A node requires a gradient iff it is a leaf created with
/// requires_grad or any of its inputs requires one; nodes that do not require
/// a gradient keep no backward closure.
class Tape {
 public:
  /// Called with the gradient flowing into the node's output. It must add
  /// (never assign) into the gradient buffers of its inputs via Tape::grad_of.
  using BackwardFn = std::function<void(Tape&, std::span<const double> out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);

  /// Appends an op node. `backward` is dropped when no input requires a gradient.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  /// Runs the chain rule from `loss` (must be a scalar on this tape) down to the leaves.
  void backward(Var loss);

  /// Accumulated gradient; zeros when nothing flowed into the node.
  Tensor grad(Var v) const;

  /// Gradient accumulation buffer for a node, allocated on first use.
  std::span<double> grad_of(Var v);

  bool requires_grad(Var v) const;
  const Tensor& value(Var v) const;
  std::string_view op_name(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Number of node backward closures invoked by the last backward().
  std::size_t backward_visits() const noexcept { return backward_visits_; }

  /// Set by ops that draw random numbers (training-mode dropout).
  void mark_stochastic() noexcept { stochastic_ = true; }
  bool stochastic() const noexcept { return stochastic_; }

 private:
  struct Node {
    std::string_view op;
    Tensor value;
    std::vector<double> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check_owned(Var v) const;

  std::deque<Node> nodes_;  // deque: Var::value() references survive later records
  std::size_t backward_visits_ = 0;
  bool stochastic_ = false;
};

}  // namespace factoreeg

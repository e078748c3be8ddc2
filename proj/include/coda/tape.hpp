#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "coda/tensor.hpp"

namespace coda {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  /// Gradient of the last backward() root with respect to this node.
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode differentiation tape.
///
/// Nodes are appended in evaluation order, so the tape is a topological
/// order of the computation by construction; backward() walks it in reverse.
/// A tape is single-use per forward pass and not thread-safe, but separate
/// tapes share nothing.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  /// Appends an op node. `backward` propagates grad(self) into its inputs and
  /// is dropped when no input requires a gradient.
  Var record(Tensor value, std::span<const Var> inputs, Backward backward);

  /// Seeds d(root)/d(root) = 1 and accumulates gradients into every node that
  /// requires one. The root must hold a single element.
  void backward(Var root);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Tensor& grad(std::size_t id) const;
  /// Mutable gradient buffer, allocated on first use. Only valid during backward().
  Tensor& grad_buffer(std::size_t id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

}  // namespace coda

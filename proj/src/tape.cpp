#include "coda/tape.hpp"

#include <algorithm>

namespace coda {

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward backward) {
  const bool needs = std::any_of(inputs.begin(), inputs.end(), [this](const Var& v) {
    if (v.tape() != this) throw std::logic_error("Var belongs to a different tape");
    return nodes_[v.id()].requires_grad;
  });
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    throw std::logic_error("no gradient recorded for node; call backward() first");
  }
  return n.grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor::zeros_like(n.value);
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw std::logic_error("root belongs to a different tape");
  if (nodes_[root.id()].value.size() != 1) {
    throw ShapeError("backward() root must be a scalar, got shape " +
                     to_string(nodes_[root.id()].value.shape()));
  }
  for (auto& n : nodes_) {
    if (n.requires_grad) n.grad = Tensor::zeros_like(n.value);
  }
  grad_buffer(root.id()).fill(1.0);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.backward) n.backward(*this, i);
  }
}

}  // namespace coda

#include "coda/nn.hpp"

#include <cmath>

namespace coda {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  // splitmix64 finaliser over the combined words
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Tensor normal_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

std::size_t ParamList::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : params_) n += t.size();
  return n;
}

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

Dense Dense::create(ParamList& params, std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Dense d;
  d.in = in;
  d.out = out;
  d.weight = params.add(uniform_tensor({in, out}, bound, rng));
  d.bias = params.add(uniform_tensor({1, out}, bound, rng));
  return d;
}

Var Dense::forward(std::span<const Var> params, Var x) const {
  return ops::matmul(x, params[weight]) + params[bias];
}

Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::kRelu: return ops::relu(x);
    case Activation::kTanh: return ops::tanh(x);
    case Activation::kNone: return x;
  }
  return x;
}

Mlp Mlp::create(ParamList& params, std::span<const std::size_t> dims, Activation hidden,
                Rng& rng) {
  if (dims.size() < 2) throw ShapeError("mlp needs at least input and output dims");
  Mlp m;
  m.hidden = hidden;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    m.layers.push_back(Dense::create(params, dims[i], dims[i + 1], rng));
  }
  return m;
}

Var Mlp::forward(std::span<const Var> params, Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i].forward(params, x);
    if (i + 1 < layers.size()) x = activate(x, hidden);
  }
  return x;
}

LstmLayer LstmLayer::create(ParamList& params, std::size_t in, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  LstmLayer l;
  l.in = in;
  l.hidden = hidden;
  l.w_input = params.add(uniform_tensor({in, 4 * hidden}, bound, rng));
  l.w_hidden = params.add(uniform_tensor({hidden, 4 * hidden}, bound, rng));
  l.bias = params.add(uniform_tensor({1, 4 * hidden}, bound, rng));
  return l;
}

LstmLayer::State LstmLayer::step(std::span<const Var> params, Var x, State prev) const {
  Var gates = ops::matmul(x, params[w_input]) + ops::matmul(prev.h, params[w_hidden]) +
              params[bias];
  const std::size_t h = hidden;
  Var i = ops::sigmoid(ops::slice_cols(gates, 0, h));
  Var f = ops::sigmoid(ops::slice_cols(gates, h, 2 * h));
  Var g = ops::tanh(ops::slice_cols(gates, 2 * h, 3 * h));
  Var o = ops::sigmoid(ops::slice_cols(gates, 3 * h, 4 * h));
  Var c = f * prev.c + i * g;
  return {o * ops::tanh(c), c};
}

}  // namespace coda

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "coda/ops.hpp"

namespace coda {

using Rng = std::mt19937_64;

/// Mixes a base seed with a stream tag so that sub-components draw from
/// independent, reproducible streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// Standard normal tensor of the given shape.
Tensor normal_tensor(Shape shape, Rng& rng);

/// Flat list of parameter tensors plus the bookkeeping to hand out slices of
/// it to layers. Layers store offsets into the list, not the tensors.
class ParamList {
 public:
  std::size_t add(Tensor t) {
    params_.push_back(std::move(t));
    return params_.size() - 1;
  }
  std::vector<Tensor>& tensors() { return params_; }
  const std::vector<Tensor>& tensors() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

 private:
  std::vector<Tensor> params_;
};

/// Affine layer y = x W + b with W: in x out, b: 1 x out.
struct Dense {
  std::size_t in = 0, out = 0;
  std::size_t weight = 0, bias = 0;  // indices into a ParamList

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) initialisation for weight and bias.
  static Dense create(ParamList& params, std::size_t in, std::size_t out, Rng& rng);
  Var forward(std::span<const Var> params, Var x) const;
};

enum class Activation { kRelu, kTanh, kNone };

/// Stack of Dense layers with a hidden activation between consecutive layers.
/// The output layer is left linear.
struct Mlp {
  std::vector<Dense> layers;
  Activation hidden = Activation::kRelu;

  static Mlp create(ParamList& params, std::span<const std::size_t> dims, Activation hidden,
                    Rng& rng);
  Var forward(std::span<const Var> params, Var x) const;
  std::size_t in_dim() const { return layers.front().in; }
  std::size_t out_dim() const { return layers.back().out; }
};

/// One LSTM layer. Gate order in the fused weight columns is input, forget,
/// candidate, output.
struct LstmLayer {
  std::size_t in = 0, hidden = 0;
  std::size_t w_input = 0, w_hidden = 0, bias = 0;

  static LstmLayer create(ParamList& params, std::size_t in, std::size_t hidden, Rng& rng);

  struct State {
    Var h, c;
  };
  State step(std::span<const Var> params, Var x, State prev) const;
};

Var activate(Var x, Activation a);

}  // namespace coda

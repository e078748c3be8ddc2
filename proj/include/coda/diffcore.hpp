#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "coda/ops.hpp"
#include "coda/tape.hpp"
#include "coda/tensor.hpp"

namespace coda {

/// Builds a scalar loss on `tape` from parameter and input leaves.
using GraphFn =
    std::function<Var(Tape& tape, std::span<const Var> params, std::span<const Var> inputs)>;

struct LossAndGrads {
  double loss = 0.0;
  std::vector<Tensor> grads;  // one per parameter, same shapes
};

/// Runs the forward pass and reverse sweep.
/// Throws ShapeError if the graph output is not a scalar and NumericError if
/// the loss is not finite.
LossAndGrads evaluate_with_gradients(const GraphFn& graph, std::span<const Tensor> params,
                                     std::span<const Tensor> inputs);

/// Forward pass only.
double evaluate(const GraphFn& graph, std::span<const Tensor> params,
                std::span<const Tensor> inputs);

/// Max over all parameter entries of |analytic - numeric| / max(1e-8, |analytic| + |numeric|),
/// with central differences of the given step.
double grad_check(const GraphFn& graph, std::span<const Tensor> params,
                  std::span<const Tensor> inputs, double step);

/// Same relative error, measured on directional derivatives: for each of
/// `directions` random unit vectors v over all parameters, the analytic
/// gradient dotted with v against a finite difference along v. Stays well
/// conditioned when individual entries are tiny next to the loss value.
double directional_grad_check(const GraphFn& graph, std::span<const Tensor> params,
                              std::span<const Tensor> inputs, double step,
                              std::size_t directions, std::uint64_t seed);

struct DirectionalCheck {
  double worst = 0.0;        // over accepted directions
  std::size_t accepted = 0;
  std::size_t redrawn = 0;   // directions with a kink inside the stencil
};

/// Like directional_grad_check, but a direction whose central differences at
/// `step` and `step / 2` disagree (relative gap above `smooth_tol`) has an
/// abs/clamp/ReLU kink within reach and is redrawn, up to 4x `directions`
/// draws in total. A wrong analytic gradient still fails: both differences
/// agree with each other and not with it.
DirectionalCheck directional_grad_check_smooth(const GraphFn& graph,
                                               std::span<const Tensor> params,
                                               std::span<const Tensor> inputs, double step,
                                               std::size_t directions, std::uint64_t seed,
                                               double smooth_tol = 1e-5);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for a fixed list of parameter tensors.
class AdamState {
 public:
  AdamState() = default;
  AdamState(AdamConfig config, std::span<const Tensor> params);

  /// Applies one bias-corrected update in place. Throws ShapeError on a shape
  /// mismatch and NumericError on non-finite gradients (parameters untouched).
  void step(std::span<Tensor> params, std::span<const Tensor> grads);

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  std::size_t step_count() const { return steps_; }
  const std::vector<Tensor>& first_moment() const { return m_; }
  const std::vector<Tensor>& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  std::size_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace coda

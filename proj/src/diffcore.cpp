#include "coda/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace coda {
namespace {

Var build(Tape& tape, const GraphFn& graph, std::span<const Tensor> params,
          std::span<const Tensor> inputs, std::vector<Var>& param_vars) {
  param_vars.clear();
  param_vars.reserve(params.size());
  for (const Tensor& p : params) param_vars.push_back(tape.parameter(p));
  std::vector<Var> input_vars;
  input_vars.reserve(inputs.size());
  for (const Tensor& x : inputs) input_vars.push_back(tape.constant(x));
  Var out = graph(tape, param_vars, input_vars);
  if (out.value().size() != 1) {
    throw ShapeError("graph output must be a scalar, got " + to_string(out.shape()));
  }
  return out;
}

}  // namespace

LossAndGrads evaluate_with_gradients(const GraphFn& graph, std::span<const Tensor> params,
                                     std::span<const Tensor> inputs) {
  Tape tape;
  std::vector<Var> pv;
  Var out = build(tape, graph, params, inputs, pv);
  const double loss = out.value().item();
  if (!std::isfinite(loss)) throw NumericError("loss is not finite");
  tape.backward(out);
  LossAndGrads result{loss, {}};
  result.grads.reserve(pv.size());
  for (const Var& p : pv) result.grads.push_back(p.grad());
  return result;
}

double evaluate(const GraphFn& graph, std::span<const Tensor> params,
                std::span<const Tensor> inputs) {
  Tape tape;
  std::vector<Var> pv;
  return build(tape, graph, params, inputs, pv).value().item();
}

double grad_check(const GraphFn& graph, std::span<const Tensor> params,
                  std::span<const Tensor> inputs, double step) {
  const LossAndGrads analytic = evaluate_with_gradients(graph, params, inputs);
  std::vector<Tensor> probe(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (std::size_t i = 0; i < probe[p].size(); ++i) {
      const double saved = probe[p][i];
      probe[p][i] = saved + step;
      const double up = evaluate(graph, probe, inputs);
      probe[p][i] = saved - step;
      const double down = evaluate(graph, probe, inputs);
      probe[p][i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.grads[p][i];
      const double err = std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

namespace {

double relative_gap(double a, double b) {
  return std::fabs(a - b) / std::max(1e-8, std::fabs(a) + std::fabs(b));
}

// Draws one random unit direction over all parameters and returns it together
// with the analytic directional derivative.
struct Direction {
  std::vector<Tensor> v;
  double analytic = 0.0;
};

Direction draw_direction(std::span<const Tensor> params, const std::vector<Tensor>& grads,
                         std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Direction d;
  double norm2 = 0.0;
  for (const Tensor& p : params) {
    Tensor v(p.shape());
    for (double& x : v.values()) {
      x = normal(rng);
      norm2 += x * x;
    }
    d.v.push_back(std::move(v));
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (std::size_t p = 0; p < d.v.size(); ++p) {
    for (std::size_t i = 0; i < d.v[p].size(); ++i) {
      d.v[p][i] *= inv;
      d.analytic += grads[p][i] * d.v[p][i];
    }
  }
  return d;
}

double central_along(const GraphFn& graph, std::span<const Tensor> params,
                     std::span<const Tensor> inputs, const Direction& d, double step) {
  std::vector<Tensor> up(params.begin(), params.end()), down = up;
  for (std::size_t p = 0; p < d.v.size(); ++p) {
    for (std::size_t i = 0; i < d.v[p].size(); ++i) {
      up[p][i] += step * d.v[p][i];
      down[p][i] -= step * d.v[p][i];
    }
  }
  return (evaluate(graph, up, inputs) - evaluate(graph, down, inputs)) / (2.0 * step);
}

}  // namespace

double directional_grad_check(const GraphFn& graph, std::span<const Tensor> params,
                              std::span<const Tensor> inputs, double step,
                              std::size_t directions, std::uint64_t seed) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check step must be > 0");
  const LossAndGrads analytic = evaluate_with_gradients(graph, params, inputs);
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < directions; ++k) {
    const Direction d = draw_direction(params, analytic.grads, rng);
    worst = std::max(worst, relative_gap(d.analytic, central_along(graph, params, inputs, d, step)));
  }
  return worst;
}

DirectionalCheck directional_grad_check_smooth(const GraphFn& graph,
                                               std::span<const Tensor> params,
                                               std::span<const Tensor> inputs, double step,
                                               std::size_t directions, std::uint64_t seed,
                                               double smooth_tol) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check step must be > 0");
  const LossAndGrads analytic = evaluate_with_gradients(graph, params, inputs);
  std::mt19937_64 rng(seed);
  DirectionalCheck out;
  for (std::size_t draws = 0; out.accepted < directions && draws < 4 * directions; ++draws) {
    const Direction d = draw_direction(params, analytic.grads, rng);
    const double full = central_along(graph, params, inputs, d, step);
    const double half = central_along(graph, params, inputs, d, step / 2);
    if (relative_gap(full, half) > smooth_tol) {
      ++out.redrawn;
      continue;
    }
    ++out.accepted;
    out.worst = std::max(out.worst, relative_gap(d.analytic, full));
  }
  if (out.accepted == 0) out.worst = std::numeric_limits<double>::infinity();
  return out;
}

AdamState::AdamState(AdamConfig config, std::span<const Tensor> params) : config_(config) {
  for (const Tensor& p : params) {
    m_.push_back(Tensor::zeros_like(p));
    v_.push_back(Tensor::zeros_like(p));
  }
}

void AdamState::step(std::span<Tensor> params, std::span<const Tensor> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("adam: expected " + std::to_string(m_.size()) + " tensors, got " +
                     std::to_string(params.size()) + " params and " +
                     std::to_string(grads.size()) + " grads");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!same_shape(params[k], m_[k]) || !same_shape(grads[k], m_[k])) {
      throw ShapeError("adam: shape mismatch at parameter " + std::to_string(k));
    }
    if (!grads[k].all_finite()) {
      throw NumericError("adam: non-finite gradient at parameter " + std::to_string(k));
    }
  }
  ++steps_;
  const auto t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    const Tensor& g = grads[k];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

}  // namespace coda

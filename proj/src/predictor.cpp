#include "coda/predictor.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "coda/diffcore.hpp"

namespace coda {

void PredictorConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("predictor learning_rate must be > 0");
  if (layers < 1 || latent_dim < 1 || hidden_dim < 1) {
    throw std::invalid_argument("predictor layers and dims must be >= 1");
  }
  if (!(lambda_ce >= 0.0)) throw std::invalid_argument("lambda_ce must be >= 0");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
}

PredictorModel PredictorModel::create(std::size_t m, const PredictorConfig& config) {
  config.validate();
  if (m < 2) throw ShapeError("predictor needs matrices of dim >= 2");
  PredictorModel model;
  model.m_ = m;
  model.config_ = config;
  Rng rng(derive_seed(config.seed, 0x70726564));
  const std::size_t p = upper_count(m);
  model.input_ = Dense::create(model.params_, p, config.latent_dim, rng);
  std::size_t in = config.latent_dim;
  for (std::size_t l = 0; l < config.layers; ++l) {
    model.layers_.push_back(LstmLayer::create(model.params_, in, config.hidden_dim, rng));
    in = config.hidden_dim;
  }
  model.head_ = Dense::create(model.params_, config.hidden_dim, p, rng);
  return model;
}

std::vector<Var> PredictorModel::unroll(std::span<const Var> params,
                                        std::span<const Var> inputs) const {
  if (inputs.empty()) throw ShapeError("predictor needs at least one input matrix");
  Tape& tape = *inputs.front().tape();
  std::vector<LstmLayer::State> state;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    state.push_back({tape.constant(Tensor({1, config_.hidden_dim})),
                     tape.constant(Tensor({1, config_.hidden_dim}))});
  }
  std::vector<Var> out;
  out.reserve(inputs.size());
  for (const Var& x : inputs) {
    if (x.shape() != Shape{1, vector_dim()}) {
      throw ShapeError("predictor input must be {1, " + std::to_string(vector_dim()) + "}, got " +
                       to_string(x.shape()));
    }
    Var h = input_.forward(params, x);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      state[l] = layers_[l].step(params, h, state[l]);
      h = state[l].h;
    }
    out.push_back(ops::tanh(head_.forward(params, h)));
  }
  return out;
}

CorrelationMatrix PredictorModel::predict_next(
    const std::vector<CorrelationMatrix>& sequence) const {
  if (sequence.empty()) throw ShapeError("predict_next needs a non-empty sequence");
  Tape tape;
  std::vector<Var> pv;
  for (const Tensor& t : params_.tensors()) pv.push_back(tape.constant(t));
  std::vector<Var> inputs;
  for (const CorrelationMatrix& c : sequence) {
    if (c.dim() != m_) {
      throw ShapeError("predict_next: matrix dim " + std::to_string(c.dim()) +
                       " does not match model dim " + std::to_string(m_));
    }
    inputs.push_back(tape.constant(Tensor({1, vector_dim()}, flatten_upper(c))));
  }
  const std::vector<Var> preds = unroll(pv, inputs);
  const Tensor& last = preds.back().value();
  return CorrelationMatrix(unflatten_upper(last.data(), m_).values(), sequence.back().names());
}

Var cp_loss(std::span<const Var> predictions, std::span<const Var> truths, double lambda_ce) {
  if (predictions.size() != truths.size() || predictions.empty()) {
    throw ShapeError("cp_loss: prediction and truth lists must be aligned and non-empty");
  }
  constexpr double kClamp = 1e-6;
  const double root2 = std::sqrt(2.0);
  Var total;
  for (std::size_t t = 0; t < predictions.size(); ++t) {
    const Var& pred = predictions[t];
    const Var& truth = truths[t];
    if (pred.shape() != truth.shape()) throw ShapeError("cp_loss: shape mismatch at step " +
                                                        std::to_string(t));
    // each off-diagonal entry appears twice in the full matrix; the diagonal matches exactly
    Var diff = pred - truth;
    Var term = ops::l2_norm(diff) * root2 + ops::sum(ops::abs(diff)) * 2.0;
    if (lambda_ce > 0.0) {
      Var p = ops::clamp(ops::add_scalar(ops::scale(pred, 0.5), 0.5), kClamp, 1.0 - kClamp);
      Var q = ops::add_scalar(ops::scale(truth, 0.5), 0.5);
      Var bce = ops::neg(ops::sum(q * ops::log(p) + (1.0 - q) * ops::log(1.0 - p)));
      term = term + bce * (2.0 * lambda_ce);
    }
    total = t == 0 ? term : total + term;
  }
  return total;
}

double cp_loss(const std::vector<CorrelationMatrix>& predictions,
               const std::vector<CorrelationMatrix>& truths, double lambda_ce) {
  if (predictions.size() != truths.size()) throw ShapeError("cp_loss: misaligned lists");
  Tape tape;
  std::vector<Var> p, t;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].dim() != truths[i].dim()) throw ShapeError("cp_loss: dim mismatch");
    const std::size_t k = upper_count(predictions[i].dim());
    p.push_back(tape.constant(Tensor({1, k}, flatten_upper(predictions[i]))));
    t.push_back(tape.constant(Tensor({1, k}, flatten_upper(truths[i]))));
  }
  return cp_loss(p, t, lambda_ce).value().item();
}

PredictorTrainResult train_predictor(const std::vector<CorrelationMatrix>& matrices,
                                     const PredictorConfig& config) {
  if (matrices.size() < 3) throw std::invalid_argument("train_predictor needs T >= 3 matrices");
  const std::size_t m = matrices.front().dim();
  std::vector<Tensor> vecs;
  for (const CorrelationMatrix& c : matrices) {
    if (c.dim() != m) throw ShapeError("train_predictor: matrices differ in dim");
    vecs.push_back(Tensor({1, upper_count(m)}, flatten_upper(c)));
  }
  // inputs C_1..C_{T-1}, targets C_2..C_T
  const std::size_t steps = vecs.size() - 1;
  const double lambda = config.lambda_ce;
  PredictorModel model = PredictorModel::create(m, config);
  GraphFn graph = [&model, steps, lambda](Tape&, std::span<const Var> params,
                                          std::span<const Var> in) {
    const std::vector<Var> preds = model.unroll(params, in.subspan(0, steps));
    return cp_loss(preds, in.subspan(1, steps), lambda);
  };

  std::vector<Tensor>& params = model.params().tensors();
  AdamState adam({.learning_rate = config.learning_rate}, params);
  PredictorTrainResult result{model, 0, std::numeric_limits<double>::infinity(), {}};
  std::size_t wait = 0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const LossAndGrads lg = evaluate_with_gradients(graph, params, vecs);
    result.loss_history.push_back(lg.loss);
    result.epochs = epoch + 1;
    if (lg.loss < result.best_loss - config.tolerance) {
      result.best_loss = lg.loss;
      result.model.params().tensors() = params;
      wait = 0;
    } else if (++wait >= config.patience) {
      break;
    }
    adam.step(params, lg.grads);
  }
  return result;
}

}  // namespace coda

#pragma once

#include <cstdint>
#include <vector>

#include "coda/correlation.hpp"
#include "coda/nn.hpp"

namespace coda {

struct PredictorConfig {
  double learning_rate = 3e-3;
  std::size_t layers = 8;
  std::size_t latent_dim = 8;
  std::size_t hidden_dim = 16;
  double lambda_ce = 20.0;
  std::size_t max_epochs = 2000;
  std::size_t patience = 50;
  double tolerance = 1e-5;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

/// Linear input projection, a stack of LSTM layers and a tanh output head over
/// vectorised (strict upper triangle) correlation matrices.
class PredictorModel {
 public:
  static PredictorModel create(std::size_t m, const PredictorConfig& config);

  std::size_t dim() const { return m_; }
  std::size_t vector_dim() const { return upper_count(m_); }
  const PredictorConfig& config() const { return config_; }
  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }

  /// Output-head bias tensor index (for inspection and tests).
  std::size_t head_bias_index() const { return head_.bias; }

  /// Feeds the inputs ({1, p} each) in order and returns the prediction after
  /// every step, each {1, p} in (-1, 1).
  std::vector<Var> unroll(std::span<const Var> params, std::span<const Var> inputs) const;

  /// Prediction for the matrix that follows `sequence`.
  CorrelationMatrix predict_next(const std::vector<CorrelationMatrix>& sequence) const;

 private:
  std::size_t m_ = 0;
  PredictorConfig config_;
  ParamList params_;
  Dense input_;
  std::vector<LstmLayer> layers_;
  Dense head_;
};

/// Differentiable composite loss over aligned {1, p} vectors. Per step it adds
/// the Frobenius and elementwise-L1 distances of the full symmetric matrices and
/// lambda_ce times the summed binary cross-entropy of (c + 1) / 2 over the
/// off-diagonal entries (predictions clamped to [1e-6, 1 - 1e-6]).
Var cp_loss(std::span<const Var> predictions, std::span<const Var> truths, double lambda_ce);

double cp_loss(const std::vector<CorrelationMatrix>& predictions,
               const std::vector<CorrelationMatrix>& truths, double lambda_ce);

struct PredictorTrainResult {
  PredictorModel model;
  std::size_t epochs = 0;
  double best_loss = 0.0;
  std::vector<double> loss_history;  // per epoch, before that epoch's update
};

/// Teacher-forced training: for t = 2..T the model reads C_1..C_{t-1} and is
/// penalised against C_t. Stops when the best loss has not improved by
/// `tolerance` for `patience` epochs; returns the best parameters.
PredictorTrainResult train_predictor(const std::vector<CorrelationMatrix>& matrices,
                                     const PredictorConfig& config);

}  // namespace coda

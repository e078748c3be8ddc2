#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "coda/correlation.hpp"
#include "coda/datasets.hpp"
#include "coda/nn.hpp"

namespace coda {

/// Where latent codes come from: N(0, I), or the encoder applied to training rows.
enum class LatentSource { kPrior, kPosterior };

struct SimulatorConfig {
  double learning_rate = 9e-3;
  std::size_t encoder_dim = 64;
  std::size_t encoder_layers = 3;
  std::size_t decoder_dim = 72;
  std::size_t decoder_layers = 3;
  std::size_t latent_dim = 2;
  double lambda_c = 1.0;
  std::size_t batch_size = 200;
  std::size_t max_epochs = 3000;
  std::size_t patience = 200;
  double tolerance = 1e-5;
  /// Standard deviation of the Gaussian observation model in the reconstruction term.
  double observation_std = 0.05;
  double eps_var = 1e-6;
  /// Learnable variance-preserving linear map applied to generated features
  /// around the training-domain mean. Starts at the identity.
  bool drift_head = true;
  /// Latents the correlation regulariser is evaluated on.
  LatentSource regularize_on = LatentSource::kPosterior;
  /// Latents used when drawing the synthetic domain.
  LatentSource sample_from = LatentSource::kPosterior;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Variational encoder/decoder over rows [x | y] of width m = d + 1.
///
/// Decoder features go through tanh; the label column through sigmoid for
/// classification and tanh for regression. With the drift head enabled,
/// generated rows are additionally mapped as x' = c + W_eff (x - c), where c and
/// S are the training-domain feature mean and covariance and
/// W_eff = diag(sqrt(S_ii / (W S W^T)_ii)) W keeps per-feature variances fixed.
class SimulatorModel {
 public:
  static SimulatorModel create(const DomainDataset& train, const SimulatorConfig& config);

  std::size_t row_dim() const { return m_; }
  std::size_t latent_dim() const { return config_.latent_dim; }
  Task task() const { return task_; }
  const SimulatorConfig& config() const { return config_; }
  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }
  bool has_head() const { return head_weight_.has_value(); }
  /// Rows [x | y] the model was created from.
  const Tensor& training_rows() const { return train_rows_; }
  /// Current head matrix W (d x d); identity when there is no head.
  Tensor head_matrix() const;

  struct Encoded {
    Var mean, log_var;
  };
  Encoded encode(std::span<const Var> params, Var rows) const;
  /// Decoder output before the drift head.
  Var decode(std::span<const Var> params, Var z) const;
  /// Applies the drift head to the feature columns (identity without a head).
  Var head(std::span<const Var> params, Var rows) const;
  Var generate(std::span<const Var> params, Var z) const { return head(params, decode(params, z)); }

 private:
  std::size_t m_ = 0;
  Task task_ = Task::kClassification;
  SimulatorConfig config_;
  ParamList params_;
  Mlp encoder_, decoder_;
  std::optional<std::size_t> head_weight_;
  Tensor center_;      // {1, d}
  Tensor covariance_;  // {d, d}
  Tensor variances_;   // {1, d}
  Tensor train_rows_;  // [x | y] of the training domain, re-encoded for posterior sampling
};

/// Negative ELBO averaged over the batch: 0.5 / sigma^2 * ||decode(z) - row||^2 plus
/// KL(q(z | row) || N(0, I)), with z = mean + exp(log_var / 2) * noise.
Var elbo_loss(const SimulatorModel& model, std::span<const Var> params, Var batch, Var noise);
double elbo_loss(const SimulatorModel& model, const Tensor& batch, const Tensor& noise);

/// Analytic KL term alone, averaged over rows.
Var gaussian_kl(Var mean, Var log_var);

/// Elementwise-L1 distance between the differentiable Pearson matrix of the
/// batch and the target.
Var corr_regularizer(Var generated, const Tensor& target, double eps_var = 1e-6);
double corr_regularizer(const Tensor& generated, const CorrelationMatrix& target,
                        double eps_var = 1e-6);

/// Full training objective for one batch: negative ELBO plus lambda_c times the
/// regulariser. With regularize_on = kPrior the regulariser sees decoded prior
/// noise; with kPosterior it sees the batch reconstructions. Both pass through
/// the drift head.
Var simulator_objective(const SimulatorModel& model, std::span<const Var> params, Var batch,
                        Var encoder_noise, Var prior_noise, const Tensor& target,
                        double lambda_c);

struct SimulatorTrainResult {
  SimulatorModel model;
  std::size_t epochs = 0;
  double best_loss = 0.0;
  double initial_loss = 0.0;  // objective at initialisation on the reference noise
  double final_loss = 0.0;    // objective of the returned parameters on the same noise
};

/// Fits the generator to `last_domain` while pulling the correlation of its
/// output towards `target`. Minibatches are reshuffled each epoch;
/// patience and best-checkpoint choice use the objective on fixed reference noise.
SimulatorTrainResult train_simulator(const DomainDataset& last_domain,
                                     const CorrelationMatrix& target,
                                     const SimulatorConfig& config);

/// Draws n rows, decoding either prior noise or posterior samples of the
/// training rows (a shuffled pass, repeated if n exceeds them). Features are
/// clipped to [-1, 1]; classification labels are thresholded at 0.5.
DomainDataset sample(const SimulatorModel& model, std::size_t n, std::uint64_t seed,
                     int domain_index, const std::vector<std::string>& feature_names = {});

}  // namespace coda

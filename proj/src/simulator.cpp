#include "coda/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "coda/diffcore.hpp"

namespace coda {

void SimulatorConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("simulator learning_rate must be > 0");
  if (encoder_dim < 1 || encoder_layers < 1 || decoder_dim < 1 || decoder_layers < 1 ||
      latent_dim < 1) {
    throw std::invalid_argument("simulator layer counts and dims must be >= 1");
  }
  if (!(lambda_c >= 0.0)) throw std::invalid_argument("lambda_c must be >= 0");
  if (batch_size < 8) throw std::invalid_argument("batch_size must be >= 8");
  if (patience < 1 || max_epochs < 1) throw std::invalid_argument("patience and max_epochs >= 1");
  if (!(observation_std > 0.0)) throw std::invalid_argument("observation_std must be > 0");
  if (!(eps_var > 0.0)) throw std::invalid_argument("eps_var must be > 0");
}

SimulatorModel SimulatorModel::create(const DomainDataset& train, const SimulatorConfig& config) {
  config.validate();
  SimulatorModel model;
  const std::size_t d = train.feature_count();
  model.m_ = d + 1;
  model.task_ = train.task();
  model.config_ = config;
  model.train_rows_ = train.joint_matrix();
  Rng rng(derive_seed(config.seed, 0x73696d));

  std::vector<std::size_t> enc{model.m_};
  for (std::size_t i = 0; i < config.encoder_layers; ++i) enc.push_back(config.encoder_dim);
  enc.push_back(2 * config.latent_dim);
  model.encoder_ = Mlp::create(model.params_, enc, Activation::kRelu, rng);

  std::vector<std::size_t> dec{config.latent_dim};
  for (std::size_t i = 0; i < config.decoder_layers; ++i) dec.push_back(config.decoder_dim);
  dec.push_back(model.m_);
  model.decoder_ = Mlp::create(model.params_, dec, Activation::kRelu, rng);

  if (config.drift_head) {
    const Tensor& x = train.features();
    const std::size_t n = x.rows();
    model.center_ = Tensor({1, d});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) model.center_[j] += x.at(i, j) / static_cast<double>(n);
    model.covariance_ = Tensor({d, d});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
          model.covariance_.at(a, b) += (x.at(i, a) - model.center_[a]) *
                                        (x.at(i, b) - model.center_[b]) /
                                        static_cast<double>(n - 1);
    model.variances_ = Tensor({1, d});
    for (std::size_t j = 0; j < d; ++j) {
      model.variances_[j] = std::max(model.covariance_.at(j, j), 1e-12);
      model.covariance_.at(j, j) = model.variances_[j];
    }
    Tensor eye({d, d});
    for (std::size_t j = 0; j < d; ++j) eye.at(j, j) = 1.0;
    model.head_weight_ = model.params_.add(std::move(eye));
  }
  return model;
}

Tensor SimulatorModel::head_matrix() const {
  const std::size_t d = m_ - 1;
  if (head_weight_) return params_.tensors()[*head_weight_];
  Tensor eye({d, d});
  for (std::size_t j = 0; j < d; ++j) eye.at(j, j) = 1.0;
  return eye;
}

SimulatorModel::Encoded SimulatorModel::encode(std::span<const Var> params, Var rows) const {
  if (rows.shape().size() != 2 || rows.shape()[1] != m_) {
    throw ShapeError("encoder expects rows of width " + std::to_string(m_) + ", got " +
                     to_string(rows.shape()));
  }
  Var h = encoder_.forward(params, rows);
  const std::size_t k = config_.latent_dim;
  // log-variance range keeps exp() finite early in training
  return {ops::slice_cols(h, 0, k), ops::clamp(ops::slice_cols(h, k, 2 * k), -30.0, 30.0)};
}

Var SimulatorModel::decode(std::span<const Var> params, Var z) const {
  Var o = decoder_.forward(params, z);
  const std::size_t d = m_ - 1;
  Var features = ops::tanh(ops::slice_cols(o, 0, d));
  Var label_logit = ops::slice_cols(o, d, m_);
  Var label = task_ == Task::kClassification ? ops::sigmoid(label_logit) : ops::tanh(label_logit);
  const std::array parts{features, label};
  return ops::concat_cols(parts);
}

Var SimulatorModel::head(std::span<const Var> params, Var rows) const {
  if (!head_weight_) return rows;
  Tape& tape = *rows.tape();
  const std::size_t d = m_ - 1;
  Var w = params[*head_weight_];
  Var s = tape.constant(covariance_);
  Var c = tape.constant(center_);
  // diag(W S W^T) as a row vector
  Var diag = ops::sum_rows(ops::transpose(ops::matmul(w, s) * w));
  Var scale = ops::sqrt(tape.constant(variances_) / diag);
  Var w_eff_t = ops::transpose(w) * scale;
  Var features = ops::matmul(ops::slice_cols(rows, 0, d) - c, w_eff_t) + c;
  const std::array parts{features, ops::slice_cols(rows, d, m_)};
  return ops::concat_cols(parts);
}

Var gaussian_kl(Var mean, Var log_var) {
  Var per = ops::square(mean) + ops::exp(log_var) - 1.0 - log_var;
  return ops::scale(ops::sum(per), 0.5 / static_cast<double>(mean.shape()[0]));
}

namespace {

struct ElboParts {
  Var loss, recon;
};

ElboParts elbo_parts(const SimulatorModel& model, std::span<const Var> params, Var batch,
                     Var noise) {
  const std::size_t n = batch.shape()[0];
  if (n == 0) throw ShapeError("elbo_loss: empty batch");
  const SimulatorModel::Encoded q = model.encode(params, batch);
  if (!q.mean.value().all_finite() || !q.log_var.value().all_finite()) {
    throw NumericError("encoder produced non-finite outputs");
  }
  Var z = q.mean + ops::exp(ops::scale(q.log_var, 0.5)) * noise;
  Var recon = model.decode(params, z);
  const double sigma = model.config().observation_std;
  Var rec = ops::scale(ops::sum(ops::square(recon - batch)),
                       0.5 / (sigma * sigma) / static_cast<double>(n));
  return {rec + gaussian_kl(q.mean, q.log_var), recon};
}

}  // namespace

Var elbo_loss(const SimulatorModel& model, std::span<const Var> params, Var batch, Var noise) {
  return elbo_parts(model, params, batch, noise).loss;
}

double elbo_loss(const SimulatorModel& model, const Tensor& batch, const Tensor& noise) {
  Tape tape;
  std::vector<Var> pv;
  for (const Tensor& t : model.params().tensors()) pv.push_back(tape.constant(t));
  return elbo_loss(model, pv, tape.constant(batch), tape.constant(noise)).value().item();
}

Var corr_regularizer(Var generated, const Tensor& target, double eps_var) {
  if (generated.shape()[0] < 8) throw ShapeError("corr_regularizer needs at least 8 rows");
  Var c = batch_pearson(generated, eps_var);
  return ops::sum(ops::abs(c - generated.tape()->constant(target)));
}

double corr_regularizer(const Tensor& generated, const CorrelationMatrix& target,
                        double eps_var) {
  Tape tape;
  return corr_regularizer(tape.constant(generated), target.values(), eps_var).value().item();
}

Var simulator_objective(const SimulatorModel& model, std::span<const Var> params, Var batch,
                        Var encoder_noise, Var prior_noise, const Tensor& target,
                        double lambda_c) {
  const ElboParts e = elbo_parts(model, params, batch, encoder_noise);
  Var loss = e.loss;
  if (lambda_c > 0.0) {
    Var generated = model.config().regularize_on == LatentSource::kPosterior
                        ? model.head(params, e.recon)
                        : model.generate(params, prior_noise);
    loss = loss + corr_regularizer(generated, target, model.config().eps_var) * lambda_c;
  }
  return loss;
}

namespace {

Tensor gather_rows(const Tensor& data, std::span<const std::size_t> idx) {
  const std::size_t m = data.cols();
  Tensor out({idx.size(), m});
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t j = 0; j < m; ++j) out.at(r, j) = data.at(idx[r], j);
  return out;
}

}  // namespace

SimulatorTrainResult train_simulator(const DomainDataset& last_domain,
                                     const CorrelationMatrix& target,
                                     const SimulatorConfig& config) {
  if (target.dim() != last_domain.feature_count() + 1) {
    throw ShapeError("target correlation dim " + std::to_string(target.dim()) +
                     " does not match row width " +
                     std::to_string(last_domain.feature_count() + 1));
  }
  SimulatorModel model = SimulatorModel::create(last_domain, config);
  const Tensor data = last_domain.joint_matrix();
  const std::size_t n = data.rows(), k = config.latent_dim;
  const std::size_t batch = std::min(config.batch_size, n);
  if (batch < 8) throw std::invalid_argument("training domain needs at least 8 rows");
  const Tensor& goal = target.values();
  const double lambda = config.lambda_c;

  GraphFn graph = [&model, &goal, lambda](Tape&, std::span<const Var> p,
                                          std::span<const Var> in) {
    return simulator_objective(model, p, in[0], in[1], in[2], goal, lambda);
  };

  Rng rng(derive_seed(config.seed, 0x747261696e));
  Rng ref_rng(derive_seed(config.seed, 0x726566));
  const std::vector<Tensor> reference{data, normal_tensor({n, k}, ref_rng),
                                      normal_tensor({n, k}, ref_rng)};

  std::vector<Tensor>& params = model.params().tensors();
  SimulatorTrainResult result{model, 0, std::numeric_limits<double>::infinity(), 0.0, 0.0};
  result.initial_loss = evaluate(graph, params, reference);

  AdamState adam({.learning_rate = config.learning_rate}, params);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t wait = 0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      if (len < 8) continue;
      const std::vector<Tensor> in{
          gather_rows(data, std::span(order).subspan(start, len)),
          normal_tensor({len, k}, rng), normal_tensor({len, k}, rng)};
      const LossAndGrads lg = evaluate_with_gradients(graph, params, in);
      adam.step(params, lg.grads);
    }
    result.epochs = epoch + 1;
    // checkpoints are ranked on fixed reference noise: the running batch loss
    // carries fresh encoder noise scaled by lambda_c, so its minimum mostly
    // picks a lucky draw rather than better parameters
    const double score = evaluate(graph, params, reference);
    if (score < result.best_loss - config.tolerance) {
      result.best_loss = score;
      result.model.params().tensors() = params;
      wait = 0;
    } else if (++wait >= config.patience) {
      break;
    }
  }
  result.final_loss = evaluate(graph, result.model.params().tensors(), reference);
  return result;
}

DomainDataset sample(const SimulatorModel& model, std::size_t n, std::uint64_t seed,
                     int domain_index, const std::vector<std::string>& feature_names) {
  if (n < 2) throw std::invalid_argument("sample: n must be >= 2");
  Rng rng(derive_seed(seed, 0x73616d));
  Tape tape;
  std::vector<Var> pv;
  for (const Tensor& t : model.params().tensors()) pv.push_back(tape.constant(t));
  Var z = tape.constant(normal_tensor({n, model.latent_dim()}, rng));
  if (model.config().sample_from == LatentSource::kPosterior) {
    const Tensor& train = model.training_rows();
    std::vector<std::size_t> order;
    std::vector<std::size_t> pass(train.rows());
    std::iota(pass.begin(), pass.end(), 0);
    while (order.size() < n) {
      std::shuffle(pass.begin(), pass.end(), rng);
      order.insert(order.end(), pass.begin(), pass.begin() + std::min(pass.size(), n - order.size()));
    }
    const SimulatorModel::Encoded q = model.encode(pv, tape.constant(gather_rows(train, order)));
    z = q.mean + ops::exp(ops::scale(q.log_var, 0.5)) * z;
  }
  const Tensor rows = model.generate(pv, z).value();
  if (!rows.all_finite()) throw NumericError("generator produced non-finite samples");
  const std::size_t d = model.row_dim() - 1;
  Tensor x({n, d});
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x.at(i, j) = std::clamp(rows.at(i, j), -1.0, 1.0);
    const double label = rows.at(i, d);
    y[i] = model.task() == Task::kClassification ? (label > 0.5 ? 1.0 : 0.0) : label;
  }
  return DomainDataset(domain_index, std::move(x), std::move(y), model.task(), feature_names);
}

}  // namespace coda

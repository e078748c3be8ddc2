#include "coda/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "coda/config.hpp"
#include "coda/diffcore.hpp"

namespace coda {

DownstreamModel DownstreamModel::create(std::size_t in_dim, Task task,
                                        const DownstreamConfig& config) {
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("downstream lr must be > 0");
  DownstreamModel model;
  model.task_ = task;
  Rng rng(derive_seed(config.seed, 0x646f776e));
  std::vector<std::size_t> dims{in_dim};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(1);
  model.net_ = Mlp::create(model.params_, dims, Activation::kRelu, rng);
  return model;
}

std::vector<double> DownstreamModel::predict(const Tensor& features) const {
  if (features.cols() != in_dim()) {
    throw ShapeError("downstream model expects " + std::to_string(in_dim()) + " features");
  }
  Tape tape;
  std::vector<Var> pv;
  for (const Tensor& t : params_.tensors()) pv.push_back(tape.constant(t));
  Var out = net_.forward(pv, tape.constant(features));
  if (task_ == Task::kClassification) out = ops::sigmoid(out);
  return out.value().values();
}

namespace {

// mean over rows of softplus(z) - z * y, written to stay finite for large |z|
Var logistic_loss(Var logits, Var labels) {
  Var softplus = ops::relu(logits) + ops::log(ops::add_scalar(ops::exp(ops::neg(ops::abs(logits))), 1.0));
  return ops::mean(softplus - logits * labels);
}

}  // namespace

DownstreamModel train_downstream(const DomainDataset& train, const DownstreamConfig& config,
                                 const DownstreamModel* init) {
  DownstreamModel model = init ? *init : DownstreamModel::create(train.feature_count(),
                                                                  train.task(), config);
  if (model.in_dim() != train.feature_count() || model.task() != train.task()) {
    throw ShapeError("initial downstream model does not match the training data");
  }
  const std::size_t n = train.rows();
  const std::vector<Tensor> inputs{train.features(), Tensor({n, 1}, train.labels())};
  const Task task = train.task();
  const Mlp& net = model.net();
  GraphFn graph = [&net, task](Tape&, std::span<const Var> p, std::span<const Var> in) {
    Var out = net.forward(p, in[0]);
    if (task == Task::kClassification) return logistic_loss(out, in[1]);
    return ops::mean(ops::square(out - in[1]));
  };
  std::vector<Tensor> params = model.params().tensors();
  std::vector<Tensor> best = params;
  double best_loss = std::numeric_limits<double>::infinity();
  AdamState adam({.learning_rate = config.learning_rate}, params);
  std::size_t wait = 0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const LossAndGrads lg = evaluate_with_gradients(graph, params, inputs);
    if (lg.loss < best_loss - config.tolerance) {
      best_loss = lg.loss;
      best = params;
      wait = 0;
    } else if (++wait >= config.patience) {
      break;
    }
    adam.step(params, lg.grads);
  }
  model.params().tensors() = std::move(best);
  return model;
}

double evaluate(const DownstreamModel& model, const DomainDataset& test,
                const NormalizationStats* stats) {
  if (model.task() != test.task()) throw std::invalid_argument("evaluate: task mismatch");
  const std::vector<double> pred = model.predict(test.features());
  const std::size_t n = test.rows();
  if (test.task() == Task::kClassification) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < n; ++i) wrong += (pred[i] > 0.5 ? 1.0 : 0.0) != test.labels()[i];
    return 100.0 * static_cast<double>(wrong) / static_cast<double>(n);
  }
  double abs_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = stats ? stats->invert_label(pred[i]) : pred[i];
    const double y = stats ? stats->invert_label(test.labels()[i]) : test.labels()[i];
    abs_err += std::fabs(p - y);
  }
  return abs_err / static_cast<double>(n);
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kCoda: return "coda";
    case Method::kCodaWithoutC: return "coda-without-C";
    case Method::kLastDomain: return "lastdomain";
    case Method::kOffline: return "offline";
    case Method::kIncFinetune: return "incfinetune";
    case Method::kPrelim: return "prelim";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kCoda, Method::kCodaWithoutC, Method::kLastDomain, Method::kOffline,
                   Method::kIncFinetune, Method::kPrelim}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown method '" + name +
                              "' (expected coda, coda-without-C, lastdomain, offline, "
                              "incfinetune or prelim)");
}

std::vector<CorrelationMatrix> source_correlations(const DomainStream& stream) {
  std::vector<CorrelationMatrix> out;
  for (const DomainDataset& d : stream.sources) out.push_back(pearson_matrix(d));
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

namespace {

struct TrainedData {
  DomainDataset data;
  std::map<std::string, double> details;
  SeedArtifacts artifacts;
};

TrainedData coda_training_set(const DomainStream& stream, bool use_correlation,
                              const ExperimentConfig& config, std::uint64_t seed) {
  const std::vector<CorrelationMatrix> seq = source_correlations(stream);
  PredictorConfig pc = config.predictor;
  pc.seed = seed;
  const PredictorTrainResult pred = train_predictor(seq, pc);
  const CorrelationMatrix c_hat = pred.model.predict_next(seq);

  SimulatorConfig sc = config.simulator;
  sc.seed = seed;
  if (!use_correlation) sc.lambda_c = 0.0;
  const DomainDataset& last = stream.last_source();
  const SimulatorTrainResult sim = train_simulator(last, c_hat, sc);

  const auto n = static_cast<std::size_t>(
      std::max(2.0, std::round(config.sample_rate * static_cast<double>(stream.target.rows()))));
  const int index = stream.target.domain_index();
  DomainDataset generated = sample(sim.model, n, seed, index, last.feature_names());

  TrainedData out{generated, {}, {seed, c_hat, generated}};
  out.details["predictor_epochs"] = static_cast<double>(pred.epochs);
  out.details["simulator_epochs"] = static_cast<double>(sim.epochs);
  // how far the prediction moved away from the last source matrix
  out.details["predicted_step_l1"] =
      matrix_distance(seq.back(), c_hat, MatrixNorm::kElementwiseL1);
  if (config.diagnostic_samples >= 8) {
    const DomainDataset draw =
        sample(sim.model, config.diagnostic_samples, derive_seed(seed, 0xd1a6), index);
    try {
      out.details["generated_corr_gap_l1"] =
          matrix_distance(pearson_matrix(draw), c_hat, MatrixNorm::kElementwiseL1);
    } catch (const DataError&) {
      // a collapsed generator has no defined correlation
      out.details["generated_corr_gap_l1"] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

}  // namespace

namespace {

struct SeedResult {
  double value = 0.0;
  std::map<std::string, double> details;
  std::optional<SeedArtifacts> artifacts;
};

SeedResult run_seed(const DomainStream& stream, Method method, const ExperimentConfig& config,
                    const NormalizationStats* stats, std::uint64_t seed) {
  SeedResult r;
  DownstreamConfig dc = config.downstream;
  dc.seed = seed;
  DownstreamModel model = [&]() -> DownstreamModel {
    switch (method) {
      case Method::kCoda:
      case Method::kCodaWithoutC: {
        TrainedData t = coda_training_set(stream, method == Method::kCoda, config, seed);
        r.details = t.details;
        r.artifacts = std::move(t.artifacts);
        return train_downstream(t.data, dc);
      }
      case Method::kLastDomain:
        return train_downstream(stream.last_source(), dc);
      case Method::kOffline:
        return train_downstream(concat_domains(stream.sources), dc);
      case Method::kIncFinetune: {
        DownstreamModel m = train_downstream(stream.sources.front(), dc);
        DownstreamConfig fine = dc;
        fine.learning_rate = dc.learning_rate * config.finetune_lr_factor;
        for (std::size_t i = 1; i < stream.sources.size(); ++i) {
          m = train_downstream(stream.sources[i], fine, &m);
        }
        return m;
      }
      case Method::kPrelim: {
        PrelimConfig pc = config.prelim;
        pc.seed = seed;
        const PrelimGenerator gen = PrelimGenerator::train(stream, pc);
        r.details["prelim_epochs"] = static_cast<double>(gen.epochs());
        r.artifacts = SeedArtifacts{seed, std::nullopt, gen.generate()};
        return train_downstream(gen.generate(), dc);
      }
    }
    throw std::invalid_argument("unknown method");
  }();
  // scoring is the only place the held-out domain is read
  r.value = evaluate(model, stream.target.reveal_for_evaluation(), stats);
  return r;
}

}  // namespace

ExperimentReport run_experiment(const DomainStream& stream, Method method,
                                const ExperimentConfig& config, const NormalizationStats* stats,
                                std::vector<SeedArtifacts>* artifacts, std::size_t threads) {
  if (config.seeds.empty()) throw std::invalid_argument("experiment needs at least one seed");
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.method = to_string(method);
  report.metric = stream.task() == Task::kClassification ? "mce_percent" : "mae";
  report.config_json = to_json(config).dump();

  const std::size_t n = config.seeds.size();
  std::vector<std::optional<SeedResult>> results(n);
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t i) {
    try {
      results[i] = run_seed(stream, method, config, stats, config.seeds[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    // seeds are independent, so each result is the same whatever the schedule
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) work(i);
      });
    }
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t i = 0; i < n; ++i) {
    SeedResult& r = *results[i];
    report.seeds.push_back(config.seeds[i]);
    report.values.push_back(r.value);
    for (const auto& [key, value] : r.details) report.details[key].push_back(value);
    if (artifacts && r.artifacts) artifacts->push_back(std::move(*r.artifacts));
  }
  report.mean = mean_of(report.values);
  report.std = population_std(report.values);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string to_string(SweepParam p) {
  return p == SweepParam::kLambdaC ? "lambda_c" : "sample_rate";
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "lambda_c") return SweepParam::kLambdaC;
  if (name == "sample_rate") return SweepParam::kSampleRate;
  throw std::invalid_argument("unknown sweep parameter '" + name +
                              "' (expected lambda_c or sample_rate)");
}

std::vector<SweepPoint> sweep(const DomainStream& stream, SweepParam param,
                              const std::vector<double>& values, const ExperimentConfig& config,
                              const NormalizationStats* stats, std::size_t threads,
                              bool validate) {
  if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
  std::optional<DomainStream> held;
  if (validate) held = stream.validation_split();
  std::vector<SweepPoint> out;
  for (double v : values) {
    ExperimentConfig c = config;
    if (param == SweepParam::kLambdaC) {
      if (!(v >= 0.0)) throw std::invalid_argument("lambda_c values must be >= 0");
      c.simulator.lambda_c = v;
    } else {
      if (!(v > 0.0)) throw std::invalid_argument("sample_rate values must be > 0");
      c.sample_rate = v;
    }
    SweepPoint p{v, run_experiment(stream, Method::kCoda, c, stats, nullptr, threads), {}};
    if (held) p.validation = run_experiment(*held, Method::kCoda, c, stats, nullptr, threads);
    out.push_back(std::move(p));
  }
  return out;
}

std::size_t best_point(const std::vector<SweepPoint>& points, bool by_validation) {
  if (points.empty()) throw std::invalid_argument("best_point: no points");
  std::size_t best = 0;
  auto score = [by_validation](const SweepPoint& p) {
    if (!by_validation) return p.report.mean;
    if (!p.validation) throw std::invalid_argument("best_point: sweep ran without validation");
    return p.validation->mean;
  };
  for (std::size_t i = 1; i < points.size(); ++i)
    if (score(points[i]) < score(points[best])) best = i;
  return best;
}

void write_sweep_csv(std::ostream& out, SweepParam param, const std::vector<SweepPoint>& points) {
  const bool val = !points.empty() && points.front().validation.has_value();
  out << to_string(param) << ",mean,std" << (val ? ",val_mean,val_std" : "") << '\n';
  std::ostringstream row;
  row.precision(10);
  for (const SweepPoint& p : points) {
    row.str({});
    row << p.value << ',' << p.report.mean << ',' << p.report.std;
    if (val && p.validation) row << ',' << p.validation->mean << ',' << p.validation->std;
    row << '\n';
    out << row.str();
  }
}

void write_report_text(std::ostream& out, const std::vector<ExperimentReport>& reports) {
  std::size_t width = 6;
  for (const auto& r : reports) width = std::max(width, r.method.size());
  out << std::left << std::setw(static_cast<int>(width) + 2) << "method" << std::setw(13)
      << "metric" << std::right << std::setw(9) << "mean" << std::setw(9) << "std"
      << std::setw(10) << "seconds" << "  per-seed\n";
  for (const auto& r : reports) {
    out << std::left << std::setw(static_cast<int>(width) + 2) << r.method << std::setw(13)
        << r.metric << std::right << std::fixed << std::setprecision(3) << std::setw(9) << r.mean
        << std::setw(9) << r.std << std::setprecision(1) << std::setw(10) << r.seconds << " ";
    out << std::setprecision(2);
    for (double v : r.values) out << ' ' << v;
    out << '\n';
    out.unsetf(std::ios::fixed);
  }
}

}  // namespace coda

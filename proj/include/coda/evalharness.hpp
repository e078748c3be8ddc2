#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "coda/baseline_prelim.hpp"
#include "coda/correlation.hpp"
#include "coda/datasets.hpp"
#include "coda/predictor.hpp"
#include "coda/simulator.hpp"

namespace coda {

struct DownstreamConfig {
  std::vector<std::size_t> hidden = {50, 50};
  double learning_rate = 1e-2;
  std::size_t max_epochs = 2000;
  std::size_t patience = 50;
  double tolerance = 1e-5;
  std::uint64_t seed = 0;

  static DownstreamConfig moons() { return {}; }
  static DownstreamConfig elec2() { return {{128, 128}, 1e-4, 2000, 50, 1e-5, 0}; }
};

/// ReLU MLP; sigmoid output for classification, linear for regression.
class DownstreamModel {
 public:
  static DownstreamModel create(std::size_t in_dim, Task task, const DownstreamConfig& config);

  Task task() const { return task_; }
  std::size_t in_dim() const { return net_.in_dim(); }
  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }
  const Mlp& net() const { return net_; }

  /// Probabilities (classification) or values (regression), one per row.
  std::vector<double> predict(const Tensor& features) const;

 private:
  Task task_ = Task::kClassification;
  ParamList params_;
  Mlp net_;
};

/// Full-batch Adam on cross-entropy (classification) or squared error
/// (regression) with the patience rule; returns the best parameters. When
/// `init` is given its weights are the starting point.
DownstreamModel train_downstream(const DomainDataset& train, const DownstreamConfig& config,
                                 const DownstreamModel* init = nullptr);

/// McE in percent at threshold 0.5, or MAE in label units (labels and
/// predictions mapped back through `stats` when given).
double evaluate(const DownstreamModel& model, const DomainDataset& test,
                const NormalizationStats* stats = nullptr);

enum class Method { kCoda, kCodaWithoutC, kLastDomain, kOffline, kIncFinetune, kPrelim };

std::string to_string(Method method);
/// Accepts the names printed by to_string; throws std::invalid_argument otherwise.
Method parse_method(const std::string& name);

struct ExperimentConfig {
  PredictorConfig predictor;
  SimulatorConfig simulator;
  DownstreamConfig downstream;
  PrelimConfig prelim;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  double sample_rate = 1.0;
  double finetune_lr_factor = 0.1;
  /// Size of the extra generator draw used for the correlation diagnostics.
  std::size_t diagnostic_samples = 1000;
};

struct ExperimentReport {
  std::string method;
  std::string metric;  // "mce_percent" or "mae"
  std::vector<std::uint64_t> seeds;
  std::vector<double> values;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over seeds
  double seconds = 0.0;
  /// Per-seed diagnostics, e.g. correlation distances; aligned with `seeds`.
  std::map<std::string, std::vector<double>> details;
  std::string config_json;
};

/// Per-seed artefacts of the generative methods, kept for export.
struct SeedArtifacts {
  std::uint64_t seed = 0;
  std::optional<CorrelationMatrix> predicted;
  std::optional<DomainDataset> generated;
};

/// Runs one method over all configured seeds. Training only ever touches
/// `stream.sources`; the held-out domain is read for scoring after training.
/// Up to `threads` seeds run concurrently; results do not depend on it.
ExperimentReport run_experiment(const DomainStream& stream, Method method,
                                const ExperimentConfig& config,
                                const NormalizationStats* stats = nullptr,
                                std::vector<SeedArtifacts>* artifacts = nullptr,
                                std::size_t threads = 1);

/// Sequence of source correlation matrices C_1..C_T.
std::vector<CorrelationMatrix> source_correlations(const DomainStream& stream);

enum class SweepParam { kLambdaC, kSampleRate };
std::string to_string(SweepParam p);
SweepParam parse_sweep_param(const std::string& name);

struct SweepPoint {
  double value = 0.0;
  ExperimentReport report;
  /// Same run with the last source held out as the scoring domain.
  std::optional<ExperimentReport> validation;
};

/// One CODA run per value. With `validate`, each value is also run on
/// stream.validation_split(), which never sees the real target.
std::vector<SweepPoint> sweep(const DomainStream& stream, SweepParam param,
                              const std::vector<double>& values, const ExperimentConfig& config,
                              const NormalizationStats* stats = nullptr,
                              std::size_t threads = 1, bool validate = false);

/// Index of the point with the lowest validation mean (report mean without validation).
std::size_t best_point(const std::vector<SweepPoint>& points, bool by_validation);

/// Columns <param>,mean,std, plus val_mean,val_std when validation ran.
void write_sweep_csv(std::ostream& out, SweepParam param, const std::vector<SweepPoint>& points);

double mean_of(const std::vector<double>& v);
double population_std(const std::vector<double>& v);

/// Aligned-column summary, one line per report.
void write_report_text(std::ostream& out, const std::vector<ExperimentReport>& reports);

}  // namespace coda

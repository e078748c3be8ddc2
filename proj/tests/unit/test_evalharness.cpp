#include <cmath>
#include <sstream>

#include "coda/evalharness.hpp"
#include "doctest.h"

using namespace coda;

namespace {

DomainDataset separable() {
  Tensor x({40, 2});
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    const double side = i < 20 ? -1.0 : 1.0;
    x.at(i, 0) = side * (0.2 + 0.02 * static_cast<double>(i % 20));
    x.at(i, 1) = 0.01 * static_cast<double>(i % 7);
    y[i] = i < 20 ? 0.0 : 1.0;
  }
  return DomainDataset(0, x, y, Task::kClassification);
}

DownstreamModel constant_model(Task task, double bias) {
  DownstreamModel m = DownstreamModel::create(2, task, DownstreamConfig{});
  for (Tensor& t : m.params().tensors()) t.fill(0.0);
  m.params().tensors().back().fill(bias);
  return m;
}

ExperimentConfig quick_config() {
  ExperimentConfig c;
  c.seeds = {0, 1};
  c.predictor.layers = 2;
  c.predictor.max_epochs = 30;
  c.simulator.encoder_dim = 8;
  c.simulator.decoder_dim = 8;
  c.simulator.max_epochs = 30;
  c.downstream.max_epochs = 100;
  c.prelim.max_epochs = 5;
  c.diagnostic_samples = 200;
  return c;
}

}  // namespace

TEST_CASE("downstream presets") {
  CHECK(DownstreamConfig::moons().hidden == std::vector<std::size_t>{50, 50});
  CHECK(DownstreamConfig::moons().learning_rate == 1e-2);
  CHECK(DownstreamConfig::elec2().hidden == std::vector<std::size_t>{128, 128});
  CHECK(DownstreamConfig::elec2().learning_rate == 1e-4);
}

TEST_CASE("separable toy set is learned exactly") {
  const DomainDataset d = separable();
  const DownstreamModel m = train_downstream(d, DownstreamConfig{});
  CHECK(evaluate(m, d) == 0.0);
}

TEST_CASE("evaluate on constant classifiers and shifted regression") {
  const DomainDataset d = separable();
  CHECK(evaluate(constant_model(Task::kClassification, 3.0), d) == doctest::Approx(50.0));
  CHECK(evaluate(constant_model(Task::kClassification, -3.0), d) == doctest::Approx(50.0));

  Tensor x({4, 2});
  const DomainDataset r(0, x, {-1.0, 0.0, 1.0, 2.0}, Task::kRegression);
  // zero weights predict the output bias everywhere
  const DownstreamModel one = constant_model(Task::kRegression, 1.0);
  const DomainDataset shifted(0, x, {0.0, 0.0, 0.0, 0.0}, Task::kRegression);
  CHECK(evaluate(one, shifted) == doctest::Approx(1.0));
  CHECK(evaluate(one, r) == doctest::Approx((2.0 + 1.0 + 0.0 + 1.0) / 4.0));
  CHECK_THROWS_AS(evaluate(one, d), std::invalid_argument);
}

TEST_CASE("regression error is reported in original label units") {
  NormalizationStats stats;
  stats.label_normalized = true;
  stats.label_offset = 10.0;
  stats.label_scale = 4.0;
  Tensor x({2, 2});
  const DomainDataset test(0, x, {0.0, 0.0}, Task::kRegression);
  CHECK(evaluate(constant_model(Task::kRegression, 0.25), test, &stats) == doctest::Approx(1.0));
}

TEST_CASE("initial weights carry over for fine-tuning") {
  const DomainDataset d = separable();
  DownstreamConfig c;
  c.max_epochs = 1;
  const DownstreamModel start = constant_model(Task::kClassification, 0.0);
  const DownstreamModel tuned = train_downstream(d, c, &start);
  CHECK(tuned.params().tensors().front().values() == start.params().tensors().front().values());
}

TEST_CASE("method names round trip") {
  for (Method m : {Method::kCoda, Method::kCodaWithoutC, Method::kLastDomain, Method::kOffline,
                   Method::kIncFinetune, Method::kPrelim}) {
    CHECK(parse_method(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("gi"), std::invalid_argument);
  CHECK(parse_sweep_param("lambda_c") == SweepParam::kLambdaC);
  CHECK_THROWS_AS(parse_sweep_param("lr"), std::invalid_argument);
}

TEST_CASE("population statistics") {
  CHECK(mean_of({1.0, 2.0, 3.0}) == 2.0);
  CHECK(population_std({1.0, 3.0}) == 1.0);
}

TEST_CASE("every method runs on a small stream") {
  const DomainStream stream = make_moons_stream(4, 40, 0.1, 0);
  const ExperimentConfig c = quick_config();
  for (Method m : {Method::kCoda, Method::kCodaWithoutC, Method::kLastDomain, Method::kOffline,
                   Method::kIncFinetune, Method::kPrelim}) {
    std::vector<SeedArtifacts> artifacts;
    const ExperimentReport r = run_experiment(stream, m, c, nullptr, &artifacts);
    CHECK(r.method == to_string(m));
    CHECK(r.metric == "mce_percent");
    CHECK(r.values.size() == 2);
    CHECK(r.mean == doctest::Approx(mean_of(r.values)));
    for (double v : r.values) CHECK((v >= 0.0 && v <= 100.0));
    if (m == Method::kCoda) {
      REQUIRE(artifacts.size() == 2);
      CHECK(artifacts[0].predicted.has_value());
      CHECK(artifacts[0].generated->rows() == stream.target.rows());
      CHECK(r.details.at("generated_corr_gap_l1").size() == 2);
    }
  }
}

TEST_CASE("runs are reproducible and independent of the thread count") {
  const DomainStream stream = make_moons_stream(4, 40, 0.1, 1);
  const ExperimentConfig c = quick_config();
  const ExperimentReport a = run_experiment(stream, Method::kCoda, c);
  const ExperimentReport b = run_experiment(stream, Method::kCoda, c, nullptr, nullptr, 2);
  CHECK(a.values == b.values);
  REQUIRE(a.details.size() == b.details.size());
  for (const auto& [key, xs] : a.details) {
    const std::vector<double>& ys = b.details.at(key);
    REQUIRE(xs.size() == ys.size());
    // an undefined gap is NaN on both sides
    for (std::size_t i = 0; i < xs.size(); ++i)
      CHECK((xs[i] == ys[i] || (std::isnan(xs[i]) && std::isnan(ys[i]))));
  }
}

TEST_CASE("sweep writes one row per value") {
  const DomainStream stream = make_moons_stream(5, 40, 0.1, 1);
  ExperimentConfig c = quick_config();
  c.seeds = {0};
  const std::vector<SweepPoint> points = sweep(stream, SweepParam::kSampleRate, {0.5, 1.0}, c);
  REQUIRE(points.size() == 2);
  std::ostringstream out;
  write_sweep_csv(out, SweepParam::kSampleRate, points);
  std::istringstream in(out.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
  CHECK(out.str().rfind("sample_rate,mean,std\n", 0) == 0);
  CHECK_THROWS_AS(sweep(stream, SweepParam::kLambdaC, {}, c), std::invalid_argument);

  const std::vector<SweepPoint> checked =
      sweep(stream, SweepParam::kLambdaC, {0.0, 1.0}, c, nullptr, 1, true);
  REQUIRE(checked[0].validation.has_value());
  CHECK(checked[0].validation->values.size() == 1);
  CHECK(best_point(checked, true) < 2);
  std::ostringstream with_val;
  write_sweep_csv(with_val, SweepParam::kLambdaC, checked);
  CHECK(with_val.str().rfind("lambda_c,mean,std,val_mean,val_std\n", 0) == 0);
  CHECK_THROWS_AS(best_point(points, true), std::invalid_argument);

  // one value is the same as a plain run
  const ExperimentReport single = run_experiment(stream, Method::kCoda, c);
  CHECK(points[1].report.values == single.values);
}

TEST_CASE("report text has one line per method") {
  ExperimentReport r;
  r.method = "coda";
  r.metric = "mce_percent";
  r.values = {1.0, 2.0};
  std::ostringstream out;
  write_report_text(out, {r, r});
  std::istringstream in(out.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
}

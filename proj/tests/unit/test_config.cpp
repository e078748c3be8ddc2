#include <filesystem>
#include <fstream>

#include "coda/config.hpp"
#include "doctest.h"

using namespace coda;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / "coda_config_test";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("defaults match the moons hyperparameters") {
  const RunConfig c = run_config_from_json(Json::object());
  CHECK(c.dataset.kind == "moons");
  CHECK(c.dataset.domains == 10);
  CHECK(c.dataset.n_per_domain == 200);
  CHECK(c.experiment.predictor.learning_rate == 3e-3);
  CHECK(c.experiment.predictor.layers == 8);
  CHECK(c.experiment.predictor.latent_dim == 8);
  CHECK(c.experiment.predictor.lambda_ce == 20.0);
  CHECK(c.experiment.simulator.learning_rate == 9e-3);
  CHECK(c.experiment.simulator.encoder_dim == 64);
  CHECK(c.experiment.simulator.encoder_layers == 3);
  CHECK(c.experiment.simulator.decoder_dim == 72);
  CHECK(c.experiment.simulator.decoder_layers == 3);
  CHECK(c.experiment.simulator.lambda_c == 1.0);
  CHECK(c.experiment.downstream.hidden == std::vector<std::size_t>{50, 50});
  CHECK(c.experiment.seeds.size() == 5);
  CHECK(c.methods == std::vector<Method>{Method::kCoda});
}

TEST_CASE("config json round trip") {
  RunConfig c;
  c.experiment.simulator.lambda_c = 5.0;
  c.experiment.seeds = {3, 4};
  c.methods = {Method::kCoda, Method::kLastDomain, Method::kCodaWithoutC};
  c.dataset.kind = "csv";
  c.dataset.csv_path = "x.csv";
  c.dataset.schema.feature_columns = {"a", "b"};
  c.dataset.normalization = NormalizationMethod::kZScore;
  const Json j = to_json(c);
  const RunConfig back = run_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.methods.size() == 3);
}

TEST_CASE("unknown keys and bad values are rejected by name") {
  try {
    run_config_from_json(Json::parse(R"({"experiment": {"simulator": {"lamda_c": 1}}})"));
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("lamda_c") != std::string::npos);
  }
  CHECK_THROWS_AS(run_config_from_json(Json::parse(R"({"methods": ["drain"]})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json::parse(R"({"dataset": {"domains": -3}})")),
                  ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json::parse(R"({"dataset": {"kind": "csv"}})")),
                  ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json::parse(R"({"experiment": {"seeds": []}})")),
                  ConfigError);
  CHECK_THROWS_AS(run_config_from_json(Json::parse(R"([1, 2])")), ConfigError);
  CHECK_THROWS_AS(
      run_config_from_json(Json::parse(R"({"experiment": {"simulator": {"sample_from": "data"}}})")),
      ConfigError);
  const RunConfig prior = run_config_from_json(
      Json::parse(R"({"experiment": {"simulator": {"regularize_on": "prior"}}})"));
  CHECK(prior.experiment.simulator.regularize_on == LatentSource::kPrior);
  CHECK(prior.experiment.simulator.sample_from == LatentSource::kPosterior);
}

TEST_CASE("missing and malformed config files") {
  try {
    load_run_config("/nonexistent/coda.json");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/coda.json") != std::string::npos);
  }
  const fs::path bad = scratch_dir() / "bad.json";
  write_file_atomic(bad, "{ not json");
  CHECK_THROWS_AS(load_run_config(bad), ConfigError);
}

TEST_CASE("atomic writes leave no temporary file") {
  const fs::path p = scratch_dir() / "nested" / "out.txt";
  write_file_atomic(p, "first");
  write_file_atomic(p, "second");
  CHECK(slurp(p) == "second");
  CHECK_FALSE(fs::exists(p.string() + ".tmp"));
}

TEST_CASE("dataset loading normalizes moons and csv alike") {
  DatasetSpec spec;
  spec.domains = 4;
  spec.n_per_domain = 20;
  const NormalizedStream moons = load_dataset(spec);
  CHECK(moons.stream.sources.size() == 3);
  CHECK(moons.stats.kept_names.size() == 2);

  const fs::path csv = scratch_dir() / "stream.csv";
  std::ostringstream text;
  text << "domain,x1,x2,label\n";
  for (int d = 0; d < 3; ++d)
    for (int i = 0; i < 4; ++i) text << d << ',' << i + d << ',' << i * i << ',' << i % 2 << '\n';
  write_file_atomic(csv, text.str());
  DatasetSpec from_csv;
  from_csv.kind = "csv";
  from_csv.csv_path = csv.string();
  const NormalizedStream s = load_dataset(from_csv);
  CHECK(s.stream.sources.size() == 2);
  CHECK(s.stream.target.rows() == 4);
}

TEST_CASE("checkpoints restore parameters and refuse mismatches") {
  ParamList params;
  params.add(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  params.add(Tensor::matrix(1, 3, {0.5, -0.5, 0.25}));
  const Json j = checkpoint_to_json("predictor", params, {{"epochs", 12}});
  CHECK(j.at("version") == kCheckpointVersion);

  ParamList target;
  target.add(Tensor({2, 2}));
  target.add(Tensor({1, 3}));
  checkpoint_from_json(Json::parse(j.dump()), "predictor", target);
  CHECK(target.tensors()[0].values() == params.tensors()[0].values());
  CHECK(target.tensors()[1].values() == params.tensors()[1].values());

  CHECK_THROWS_AS(checkpoint_from_json(j, "simulator", target), ConfigError);
  ParamList wrong;
  wrong.add(Tensor({2, 2}));
  wrong.add(Tensor({3, 1}));
  CHECK_THROWS_AS(checkpoint_from_json(j, "predictor", wrong), ConfigError);
  Json old = j;
  old["version"] = 0;
  CHECK_THROWS_AS(checkpoint_from_json(old, "predictor", target), ConfigError);
}

TEST_CASE("reports serialize with their configuration") {
  ExperimentReport r;
  r.method = "coda";
  r.metric = "mce_percent";
  r.seeds = {0, 1};
  r.values = {2.0, 4.0};
  r.mean = 3.0;
  r.details["generated_corr_gap_l1"] = {0.1, 0.2};
  r.config_json = to_json(ExperimentConfig{}).dump();
  const Json j = to_json(r);
  CHECK(j.at("mean") == 3.0);
  CHECK(j.at("values").size() == 2);
  CHECK(j.at("config").at("simulator").at("lambda_c") == 1.0);
}

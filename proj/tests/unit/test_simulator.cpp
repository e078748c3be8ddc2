#include <cmath>
#include <random>

#include "coda/diffcore.hpp"
#include "coda/simulator.hpp"
#include "doctest.h"

using namespace coda;

namespace {

SimulatorConfig tiny_config(std::uint64_t seed = 0) {
  SimulatorConfig c;
  c.encoder_dim = 8;
  c.encoder_layers = 2;
  c.decoder_dim = 8;
  c.decoder_layers = 2;
  c.seed = seed;
  return c;
}

Tensor gaussian(Shape shape, std::mt19937_64& rng, double sd = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> n(0.0, sd);
  for (double& v : t.values()) v = n(rng);
  return t;
}

DomainDataset moons(int index = 8) { return make_moons_domain(200, index, 0.1, 1).with_index(index); }

Tensor batch_of(const DomainDataset& d, std::size_t rows) {
  const Tensor joint = d.joint_matrix();
  Tensor out({rows, joint.cols()});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < joint.cols(); ++j) out.at(i, j) = joint.at(i, j);
  return out;
}

}  // namespace

TEST_CASE("gaussian kl closed forms") {
  Tape tape;
  Var zero = tape.constant(Tensor({1, 1}));
  CHECK(gaussian_kl(zero, zero).value().item() == 0.0);
  Var one = tape.constant(Tensor::scalar(1.0));
  CHECK(gaussian_kl(one, zero).value().item() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("regularizer vanishes on a matching batch and hits 2 on perfect correlation") {
  std::mt19937_64 rng(4);
  const Tensor batch = gaussian({64, 3}, rng);
  const CorrelationMatrix own = pearson_matrix(batch);
  CHECK(corr_regularizer(batch, own, 0.0) < 1e-12);
  CHECK(corr_regularizer(batch, own) < 1e-5);

  Tensor twins({32, 2});
  for (std::size_t i = 0; i < 32; ++i) {
    const double v = static_cast<double>(i) / 10.0;
    twins.at(i, 0) = v;
    twins.at(i, 1) = v;
  }
  CHECK(corr_regularizer(twins, CorrelationMatrix::identity(2)) == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("regularizer needs eight rows") {
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(corr_regularizer(gaussian({7, 2}, rng), CorrelationMatrix::identity(2)),
                  ShapeError);
}

TEST_CASE("regularizer gradient with respect to the batch") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Tensor> params{gaussian({16, 3}, rng)};
    const Tensor target = pearson_matrix(gaussian({20, 3}, rng)).values();
    GraphFn g = [&target](Tape&, std::span<const Var> p, std::span<const Var>) {
      return corr_regularizer(p[0], target);
    };
    CHECK(grad_check(g, params, {}, 1e-6) < 1e-4);
  }
}

TEST_CASE("objective gradient with frozen noise") {
  const DomainDataset d = moons();
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    SimulatorConfig config = tiny_config(seed);
    // odd seeds put the regulariser on prior draws instead of reconstructions
    if (seed % 2 == 1) config.regularize_on = LatentSource::kPrior;
    const SimulatorModel model = SimulatorModel::create(d, config);
    std::mt19937_64 rng(seed + 100);
    const std::vector<Tensor> inputs{batch_of(d, 16), gaussian({16, 2}, rng),
                                     gaussian({16, 2}, rng)};
    const Tensor target = CorrelationMatrix::identity(3).values();
    GraphFn g = [&model, &target](Tape&, std::span<const Var> p, std::span<const Var> in) {
      return simulator_objective(model, p, in[0], in[1], in[2], target, 1.0);
    };
    CHECK(grad_check(g, model.params().tensors(), inputs, 1e-6) < 1e-4);
  }
}

TEST_CASE("decoded rows respect the output ranges") {
  const SimulatorModel model = SimulatorModel::create(moons(), tiny_config());
  Tape tape;
  std::vector<Var> pv;
  for (const Tensor& t : model.params().tensors()) pv.push_back(tape.constant(t));
  std::mt19937_64 rng(2);
  const Tensor out = model.decode(pv, tape.constant(gaussian({50, 2}, rng, 3.0))).value();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    CHECK(std::fabs(out.at(i, 0)) <= 1.0);
    CHECK(std::fabs(out.at(i, 1)) <= 1.0);
    CHECK(out.at(i, 2) >= 0.0);
    CHECK(out.at(i, 2) <= 1.0);
  }
}

TEST_CASE("drift head starts at the identity and keeps feature variances") {
  const DomainDataset d = moons();
  SimulatorModel model = SimulatorModel::create(d, tiny_config());
  REQUIRE(model.has_head());
  const Tensor eye = model.head_matrix();
  CHECK(eye.at(0, 0) == 1.0);
  CHECK(eye.at(0, 1) == 0.0);

  // any W: the head output has the source variances on D_T itself
  Tensor& w = model.params().tensors().back();
  w = Tensor::matrix(2, 2, {0.7, -0.6, 0.4, 1.1});
  Tape tape;
  std::vector<Var> pv;
  for (const Tensor& t : model.params().tensors()) pv.push_back(tape.constant(t));
  const Tensor moved = model.head(pv, tape.constant(d.joint_matrix())).value();
  for (std::size_t j = 0; j < 2; ++j) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < d.rows(); ++i) {
      ma += d.features().at(i, j);
      mb += moved.at(i, j);
    }
    ma /= d.rows();
    mb /= d.rows();
    double va = 0, vb = 0;
    for (std::size_t i = 0; i < d.rows(); ++i) {
      va += std::pow(d.features().at(i, j) - ma, 2);
      vb += std::pow(moved.at(i, j) - mb, 2);
    }
    CHECK(vb == doctest::Approx(va).epsilon(1e-9));
    CHECK(mb == doctest::Approx(ma).epsilon(1e-9));
  }
  for (std::size_t i = 0; i < d.rows(); ++i) CHECK(moved.at(i, 2) == d.labels()[i]);
}

TEST_CASE("training does not end above the starting objective") {
  SimulatorConfig c = tiny_config(3);
  c.max_epochs = 150;
  const DomainDataset d = moons();
  const SimulatorTrainResult r = train_simulator(d, pearson_matrix(d), c);
  CHECK(r.final_loss <= r.initial_loss);
  CHECK(r.epochs > 0);
}

TEST_CASE("sample has the requested shape and is deterministic") {
  SimulatorConfig c = tiny_config();
  c.max_epochs = 20;
  const DomainDataset d = moons();
  const SimulatorTrainResult r = train_simulator(d, pearson_matrix(d), c);
  const DomainDataset a = sample(r.model, 200, 7, 9);
  const DomainDataset b = sample(r.model, 200, 7, 9);
  CHECK(a.rows() == 200);
  CHECK(a.feature_count() == 2);
  CHECK(a.domain_index() == 9);
  CHECK(a.features().values() == b.features().values());
  CHECK(a.labels() == b.labels());
  for (double y : a.labels()) CHECK((y == 0.0 || y == 1.0));
  CHECK(sample(r.model, 200, 8, 9).features().values() != a.features().values());
}

TEST_CASE("posterior sampling covers any size and the prior path still works") {
  SimulatorConfig c = tiny_config();
  c.max_epochs = 5;
  const DomainDataset d = moons();
  const SimulatorTrainResult r = train_simulator(d, pearson_matrix(d), c);
  CHECK(sample(r.model, 50, 1, 9).rows() == 50);
  CHECK(sample(r.model, 450, 1, 9).rows() == 450);
  c.sample_from = LatentSource::kPrior;
  const SimulatorTrainResult p = train_simulator(d, pearson_matrix(d), c);
  CHECK(sample(p.model, 30, 1, 9).rows() == 30);
}

TEST_CASE("without the regulariser samples stay closest to the training domain") {
  SimulatorConfig c;
  c.lambda_c = 0.0;
  c.max_epochs = 400;
  const DomainDataset d = moons(8);
  const CorrelationMatrix own = pearson_matrix(d);
  const SimulatorTrainResult r = train_simulator(d, own, c);
  const CorrelationMatrix drawn = pearson_matrix(sample(r.model, 1000, 3, 9));
  const double home = matrix_distance(drawn, own, MatrixNorm::kElementwiseL1);
  for (int k : {-3, -2, -1, 1, 2, 3}) {
    const CorrelationMatrix rotated = pearson_matrix(moons(8 + k));
    CHECK(home < matrix_distance(drawn, rotated, MatrixNorm::kElementwiseL1));
  }
}

TEST_CASE("simulator config validation") {
  SimulatorConfig c;
  c.latent_dim = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SimulatorConfig{};
  c.observation_std = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SimulatorConfig{};
  c.lambda_c = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("target dimension must match the data") {
  SimulatorConfig c = tiny_config();
  c.max_epochs = 1;
  CHECK_THROWS_AS(train_simulator(moons(), CorrelationMatrix::identity(4), c), ShapeError);
}

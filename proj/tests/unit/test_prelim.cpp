#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "coda/baseline_prelim.hpp"
#include "coda/diffcore.hpp"
#include "doctest.h"

using namespace coda;

namespace {

DensityGrid two_point(double a, double b) {
  DensityGrid g;
  g.points = {0.0, 1.0};
  g.masses = {a, b};
  g.density = g.masses;
  return g;
}

}  // namespace

TEST_CASE("kde peak follows the gaussian kernel") {
  const std::vector<double> zeros(10, 0.0);
  const double h = 0.2;
  const DensityGrid g = kde_density(zeros, h, {-0.4, -0.2, 0.0, 0.2, 0.4});
  CHECK(g.density[2] == doctest::Approx(1.0 / (h * std::sqrt(2.0 * std::numbers::pi))));
  CHECK(g.masses[2] > g.masses[1]);
  double total = 0.0;
  for (double m : g.masses) total += m;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("kde of symmetric samples is symmetric") {
  const std::vector<double> s{-0.5, 0.5};
  const DensityGrid g = kde_density(s);
  const std::size_t n = g.masses.size();
  for (std::size_t i = 0; i < n; ++i) CHECK(g.masses[i] == doctest::Approx(g.masses[n - 1 - i]));
}

TEST_CASE("silverman bandwidth") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> s(500);
  for (double& v : s) v = nd(rng);
  double mean = 0.0;
  for (double v : s) mean += v / 500.0;
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean) / 499.0;
  CHECK(silverman_bandwidth(s) == doctest::Approx(1.06 * std::sqrt(var) * std::pow(500.0, -0.2)));
  CHECK_THROWS_AS(kde_density(std::vector<double>{1.0}), std::invalid_argument);
  CHECK_THROWS_AS(kde_density(s, 0.0), std::invalid_argument);
}

TEST_CASE("grid kl closed form and positivity") {
  CHECK(kl_grid(two_point(0.5, 0.5), two_point(0.5, 0.5)) == 0.0);
  CHECK(kl_grid(two_point(0.5, 0.5), two_point(0.75, 0.25)) ==
        doctest::Approx(0.5 * std::log(2.0 / 3.0) + 0.5 * std::log(2.0)));
  CHECK(kl_grid(two_point(0.5, 0.5), two_point(0.75, 0.25)) == doctest::Approx(0.1438).epsilon(1e-3));

  std::mt19937_64 rng(5);
  std::exponential_distribution<double> e(1.0);
  for (int trial = 0; trial < 100; ++trial) {
    DensityGrid p, q;
    double sp = 0, sq = 0;
    for (int i = 0; i < 16; ++i) {
      p.masses.push_back(e(rng));
      q.masses.push_back(e(rng));
      sp += p.masses.back();
      sq += q.masses.back();
      p.points.push_back(i);
      q.points.push_back(i);
    }
    for (double& m : p.masses) m /= sp;
    for (double& m : q.masses) m /= sq;
    CHECK(kl_grid(p, q) >= 0.0);
  }
}

TEST_CASE("prelim loss is zero on identical data and positive on a flipped feature") {
  const DomainDataset d = make_moons_domain(200, 2, 0.1, 3);
  CHECK(prelim_loss(d, d) < 1e-6);
  Tensor flipped = d.features();
  for (std::size_t i = 0; i < flipped.rows(); ++i) flipped.at(i, 0) = -flipped.at(i, 0);
  const DomainDataset other(d.domain_index(), flipped, d.labels(), d.task());
  CHECK(prelim_loss(other, d) > 0.0);
}

TEST_CASE("prelim loss sums one non-negative term per feature") {
  const DomainDataset a = make_moons_domain(200, 2, 0.1, 3);
  const DomainDataset b = make_moons_domain(200, 4, 0.1, 3);
  const auto column = [](const DomainDataset& d, std::size_t j) {
    Tensor t({d.rows(), 1});
    for (std::size_t i = 0; i < d.rows(); ++i) t[i] = d.features().at(i, j);
    return DomainDataset(d.domain_index(), t, d.labels(), d.task());
  };
  const double t0 = prelim_loss(column(a, 0), column(b, 0));
  const double t1 = prelim_loss(column(a, 1), column(b, 1));
  CHECK(t0 >= 0.0);
  CHECK(t1 >= 0.0);
  CHECK(prelim_loss(a, b) == doctest::Approx(t0 + t1));
}

TEST_CASE("prelim loss needs both classes") {
  const DomainDataset one_class(0, Tensor::matrix(3, 1, {0.1, 0.2, 0.3}), {1, 1, 1},
                                Task::kClassification);
  const DomainDataset mixed(0, Tensor::matrix(3, 1, {0.1, 0.2, 0.3}), {0, 1, 1},
                            Task::kClassification);
  CHECK_THROWS_AS(prelim_loss(one_class, mixed), DataError);
}

TEST_CASE("differentiable kde matches the plain estimate and its gradient") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  std::vector<double> s(20);
  for (double& v : s) v = u(rng);
  const std::vector<double> grid = DensityGrid::uniform_points(-1.2, 1.2, 32);
  Tape tape;
  const Tensor masses = kde_grid_var(tape.constant(Tensor({20, 1}, s)), 0.15, grid).value();
  const DensityGrid plain = kde_density(s, 0.15, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(masses[i] == doctest::Approx(plain.masses[i]));

  std::vector<Tensor> params{Tensor({20, 1}, s)};
  std::vector<Tensor> weights{Tensor({1, 32})};
  for (double& w : weights[0].values()) w = u(rng);
  GraphFn g = [&grid](Tape&, std::span<const Var> p, std::span<const Var> in) {
    return ops::sum(kde_grid_var(p[0], 0.15, grid) * in[0]);
  };
  CHECK(grad_check(g, params, weights, 1e-6) < 1e-4);
}

TEST_CASE("prelim generator trains on a short stream") {
  const DomainStream stream = make_moons_stream(4, 40, 0.1, 2);
  PrelimConfig c;
  c.max_epochs = 15;
  const PrelimGenerator gen = PrelimGenerator::train(stream, c);
  const DomainDataset out = gen.generate();
  CHECK(out.rows() == stream.last_source().rows());
  CHECK(out.feature_count() == 2);
  CHECK(gen.epochs() > 0);
  for (double y : out.labels()) CHECK((y == 0.0 || y == 1.0));
}

TEST_CASE("prelim on a stationary stream stays near the data") {
  const DomainDataset base = make_moons_domain(100, 0, 0.1, 6);
  std::vector<DomainDataset> sources;
  for (int i = 0; i < 5; ++i) sources.push_back(base.with_index(i));
  const DomainStream stream = DomainStream::create(sources, base.with_index(5));
  PrelimConfig c;
  c.max_epochs = 200;
  const PrelimGenerator gen = PrelimGenerator::train(stream, c);
  const double self = prelim_loss(make_moons_domain(100, 0, 0.1, 7), base);
  CHECK(prelim_loss(gen.generate(), base) < 2.0 * std::max(self, gen.best_loss()));
}

TEST_CASE("density csv") {
  std::ostringstream out;
  write_density_csv(out, two_point(0.25, 0.75));
  CHECK(out.str().rfind("grid,mass\n", 0) == 0);
}

#include <cmath>
#include <random>

#include "coda/theorem_bound.hpp"
#include "doctest.h"

using namespace coda;

TEST_CASE("tv of identical distributions is zero") {
  std::mt19937_64 rng(1);
  const FiniteJointDistribution p = random_distribution(rng, 6, 3);
  CHECK(tv_exact(p, p) == 0.0);
  CHECK(tv_dual_enumeration(p, p) == 0.0);
}

TEST_CASE("bernoulli marginals differ by 0.1") {
  const FiniteJointDistribution p(Tensor::matrix(2, 1, {0, 1}), {0.5, 0.5});
  const FiniteJointDistribution q(Tensor::matrix(2, 1, {0, 1}), {0.4, 0.6});
  CHECK(tv_exact(p, q) == doctest::Approx(0.1));
  CHECK(tv_dual_enumeration(p, q) == doctest::Approx(0.1));
}

TEST_CASE("tv aligns different supports") {
  const FiniteJointDistribution p(Tensor::matrix(2, 1, {0, 1}), {0.5, 0.5});
  const FiniteJointDistribution q(Tensor::matrix(2, 1, {1, 2}), {0.5, 0.5});
  CHECK(tv_exact(p, q) == doctest::Approx(0.5));
  CHECK(tv_dual_enumeration(p, q) == doctest::Approx(0.5));
}

TEST_CASE("dual form equals the half-sum form on random supports") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> k(1, 12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t size = k(rng);
    const FiniteJointDistribution p = random_distribution(rng, size, 2);
    std::exponential_distribution<double> e(1.0);
    std::vector<double> masses(size);
    double total = 0.0;
    for (double& m : masses) total += (m = e(rng));
    for (double& m : masses) m /= total;
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < size; ++i) sum += masses[i];
    masses.back() = 1.0 - sum;
    if (masses.back() < 0.0) continue;
    const FiniteJointDistribution q(p.points(), masses);
    CHECK(std::fabs(tv_exact(p, q) - tv_dual_enumeration(p, q)) <= 1e-12);
  }
}

TEST_CASE("distribution validation") {
  CHECK_THROWS(FiniteJointDistribution(Tensor::matrix(2, 1, {0, 1}), {0.5, 0.6}));
  CHECK_THROWS(FiniteJointDistribution(Tensor::matrix(2, 1, {0, 1}), {-0.5, 1.5}));
  CHECK_THROWS(FiniteJointDistribution(Tensor::matrix(2, 1, {0, 1}), {1.0}));
}

TEST_CASE("exact correlation of simple distributions") {
  const FiniteJointDistribution comonotone(Tensor::matrix(2, 2, {-1, -1, 1, 1}), {0.5, 0.5});
  CHECK(corr_exact(comonotone).at(0, 1) == doctest::Approx(1.0));

  // product of two independent two-point marginals
  const FiniteJointDistribution product(Tensor::matrix(4, 2, {0, 0, 0, 1, 1, 0, 1, 1}),
                                        {0.3 * 0.6, 0.3 * 0.4, 0.7 * 0.6, 0.7 * 0.4});
  CHECK(std::fabs(corr_exact(product).at(0, 1)) < 1e-12);

  const FiniteJointDistribution flat(Tensor::matrix(2, 2, {0, 1, 0, 2}), {0.5, 0.5});
  CHECK_THROWS_AS(corr_exact(flat), DataError);
}

TEST_CASE("exact correlation agrees with a large monte carlo sample") {
  std::mt19937_64 rng(33);
  const FiniteJointDistribution p = random_distribution(rng, 6, 3);
  const CorrelationMatrix exact = corr_exact(p);
  std::discrete_distribution<std::size_t> pick(p.masses().begin(), p.masses().end());
  const std::size_t n = 1000000;
  Tensor draws({n, 3});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = pick(rng);
    for (std::size_t j = 0; j < 3; ++j) draws.at(i, j) = p.points().at(k, j);
  }
  const CorrelationMatrix mc = pearson_matrix(draws);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::fabs(mc.at(i, j) - exact.at(i, j)) < 0.005);
}

TEST_CASE("bound is tight at zero shift") {
  std::mt19937_64 rng(2);
  const auto [p, q] = random_pair(rng);
  const BoundReport r = verify_bound(p, p);
  CHECK(r.epsilon == 0.0);
  CHECK(r.lhs == 0.0);
  CHECK(r.rhs == 0.0);
  CHECK_FALSE(r.violated);
  const Lemma2Report l = lemma2_check(p, p);
  CHECK(l.max_mean_gap == 0.0);
  CHECK(l.max_product_gap == 0.0);
  CHECK(l.max_variance_gap == 0.0);
}

TEST_CASE("bound formula on a worked instance") {
  // x in {-1, 1}, y in {-0.5, 0.5}; moving 0.1 of mass keeps var(y) = 0.25
  const Tensor pts = Tensor::matrix(4, 2, {1, 0.5, -1, 0.5, 1, -0.5, -1, -0.5});
  const FiniteJointDistribution p(pts, {0.25, 0.25, 0.25, 0.25});
  const FiniteJointDistribution q(pts, {0.15, 0.35, 0.25, 0.25});
  const BoundReport r = verify_bound(p, q);
  CHECK(r.d == 2);
  CHECK(r.epsilon == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.a == 1.0);
  CHECK(r.delta == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.rhs == doctest::Approx(24.0).epsilon(1e-12));
  CHECK(r.lhs <= 4.0);
  CHECK_FALSE(r.violated);
}

TEST_CASE("lemma two on a single mass transfer") {
  const FiniteJointDistribution p(Tensor::matrix(3, 2, {-1, 0.5, 0.2, -0.8, 0.9, 0.3}),
                                  {0.3, 0.3, 0.4});
  const FiniteJointDistribution q(p.points(), {0.25, 0.35, 0.4});
  const Lemma2Report l = lemma2_check(p, q);
  CHECK(l.epsilon == doctest::Approx(0.05));
  CHECK(l.a == 1.0);
  // y moves from 0.5 to -0.8 on 0.05 of mass
  CHECK(l.max_mean_gap == doctest::Approx(0.05 * 1.3));
  CHECK(l.all_ok());
}

TEST_CASE("random pairs never violate the bound") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 200; ++i) {
    const auto [p, q] = random_pair(rng);
    CHECK(p.dim() <= 4);
    CHECK(p.support_size() <= 16);
    CHECK_FALSE(verify_bound(p, q).violated);
    CHECK(lemma2_check(p, q).all_ok());
  }
}

#include "coda/theorem_bound.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace coda {

FiniteJointDistribution::FiniteJointDistribution(Tensor points, std::vector<double> masses)
    : points_(std::move(points)), masses_(std::move(masses)) {
  if (points_.rank() != 2 || points_.rows() != masses_.size()) {
    throw ShapeError("distribution needs K x m points and K masses");
  }
  if (!points_.all_finite()) throw std::invalid_argument("support points must be finite");
  double total = 0.0;
  for (double w : masses_) {
    if (!(w >= 0.0)) throw std::invalid_argument("masses must be non-negative");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "masses sum to " << total << ", expected 1";
    throw std::invalid_argument(msg.str());
  }
}

std::vector<double> FiniteJointDistribution::mean() const {
  std::vector<double> mu(dim(), 0.0);
  for (std::size_t k = 0; k < support_size(); ++k)
    for (std::size_t i = 0; i < dim(); ++i) mu[i] += masses_[k] * points_.at(k, i);
  return mu;
}

Tensor FiniteJointDistribution::second_moment() const {
  const std::size_t m = dim();
  Tensor e({m, m});
  for (std::size_t k = 0; k < support_size(); ++k)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        e.at(i, j) += masses_[k] * points_.at(k, i) * points_.at(k, j);
  return e;
}

std::vector<double> FiniteJointDistribution::variance() const {
  // centred sums avoid cancellation in E[U^2] - E[U]^2
  const std::vector<double> mu = mean();
  std::vector<double> var(dim(), 0.0);
  for (std::size_t k = 0; k < support_size(); ++k)
    for (std::size_t i = 0; i < dim(); ++i) {
      const double c = points_.at(k, i) - mu[i];
      var[i] += masses_[k] * c * c;
    }
  return var;
}

double FiniteJointDistribution::max_abs_coordinate() const {
  double a = 0.0;
  for (double v : points_.values()) a = std::max(a, std::fabs(v));
  return a;
}

std::pair<FiniteJointDistribution, FiniteJointDistribution> align_supports(
    const FiniteJointDistribution& p, const FiniteJointDistribution& q) {
  if (p.dim() != q.dim()) {
    throw ShapeError("distributions have different dimensions: " + std::to_string(p.dim()) +
                     " vs " + std::to_string(q.dim()));
  }
  const std::size_t m = p.dim();
  auto row = [m](const Tensor& t, std::size_t k) {
    return std::vector<double>(t.values().begin() + k * m, t.values().begin() + (k + 1) * m);
  };
  std::vector<std::vector<double>> points;
  std::vector<double> pm, qm;
  auto index_of = [&](const std::vector<double>& pt) {
    const auto it = std::find(points.begin(), points.end(), pt);
    if (it != points.end()) return static_cast<std::size_t>(it - points.begin());
    points.push_back(pt);
    pm.push_back(0.0);
    qm.push_back(0.0);
    return points.size() - 1;
  };
  for (std::size_t k = 0; k < p.support_size(); ++k) pm[index_of(row(p.points(), k))] += p.masses()[k];
  for (std::size_t k = 0; k < q.support_size(); ++k) qm[index_of(row(q.points(), k))] += q.masses()[k];
  std::vector<double> flat;
  for (const auto& pt : points) flat.insert(flat.end(), pt.begin(), pt.end());
  Tensor support({points.size(), m}, flat);
  return {FiniteJointDistribution(support, std::move(pm)),
          FiniteJointDistribution(support, std::move(qm))};
}

namespace {

bool same_support(const FiniteJointDistribution& p, const FiniteJointDistribution& q) {
  return same_shape(p.points(), q.points()) && p.points().values() == q.points().values();
}

}  // namespace

double tv_exact(const FiniteJointDistribution& p, const FiniteJointDistribution& q) {
  if (!same_support(p, q)) {
    const auto [pa, qa] = align_supports(p, q);
    return tv_exact(pa, qa);
  }
  double s = 0.0;
  for (std::size_t k = 0; k < p.support_size(); ++k) s += std::fabs(p.masses()[k] - q.masses()[k]);
  return 0.5 * s;
}

double tv_dual_enumeration(const FiniteJointDistribution& p, const FiniteJointDistribution& q) {
  if (!same_support(p, q)) {
    const auto [pa, qa] = align_supports(p, q);
    return tv_dual_enumeration(pa, qa);
  }
  const std::size_t k = p.support_size();
  if (k > 24) throw std::invalid_argument("event enumeration limited to 24 support points");
  std::vector<double> diff(k);
  for (std::size_t i = 0; i < k; ++i) diff[i] = p.masses()[i] - q.masses()[i];
  double best = 0.0;
  const std::uint64_t events = std::uint64_t{1} << k;
  for (std::uint64_t e = 0; e < events; ++e) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      if (e >> i & 1U) s += diff[i];
    best = std::max(best, std::fabs(s));
  }
  return best;
}

CorrelationMatrix corr_exact(const FiniteJointDistribution& p, double min_variance) {
  const std::size_t m = p.dim();
  const std::vector<double> mu = p.mean();
  const std::vector<double> var = p.variance();
  for (std::size_t i = 0; i < m; ++i) {
    if (!(var[i] >= min_variance)) {
      throw DataError("coordinate " + std::to_string(i) + " has variance below " +
                      std::to_string(min_variance));
    }
  }
  Tensor cov({m, m});
  for (std::size_t k = 0; k < p.support_size(); ++k)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        cov.at(i, j) += p.masses()[k] * (p.points().at(k, i) - mu[i]) * (p.points().at(k, j) - mu[j]);
  Tensor c({m, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) c.at(i, j) = cov.at(i, j) / std::sqrt(var[i] * var[j]);
  return CorrelationMatrix::repair(std::move(c));
}

BoundReport verify_bound(const FiniteJointDistribution& p, const FiniteJointDistribution& q) {
  const auto [pa, qa] = align_supports(p, q);
  BoundReport r;
  r.d = pa.dim();
  r.epsilon = tv_exact(pa, qa);
  r.a = std::max(pa.max_abs_coordinate(), qa.max_abs_coordinate());
  const std::vector<double> vp = pa.variance(), vq = qa.variance();
  r.delta = std::min(*std::min_element(vp.begin(), vp.end()),
                     *std::min_element(vq.begin(), vq.end()));
  if (!(r.delta > 0.0)) {
    throw DataError("positive-variance assumption violated (min variance " +
                    std::to_string(r.delta) + ")");
  }
  r.lhs = matrix_distance(corr_exact(pa, 0.0), corr_exact(qa, 0.0), MatrixNorm::kInduced1);
  const double a2 = r.a * r.a;
  r.rhs = 6.0 * static_cast<double>(r.d) * r.epsilon * a2 * (1.0 / r.delta + a2 / (r.delta * r.delta));
  r.violated = r.lhs > r.rhs + kBoundTolerance;
  return r;
}

Lemma2Report lemma2_check(const FiniteJointDistribution& p, const FiniteJointDistribution& q) {
  const auto [pa, qa] = align_supports(p, q);
  Lemma2Report r;
  r.epsilon = tv_exact(pa, qa);
  r.a = std::max(pa.max_abs_coordinate(), qa.max_abs_coordinate());
  const std::vector<double> mp = pa.mean(), mq = qa.mean();
  const std::vector<double> vp = pa.variance(), vq = qa.variance();
  const Tensor ep = pa.second_moment(), eq = qa.second_moment();
  for (std::size_t i = 0; i < pa.dim(); ++i) {
    r.max_mean_gap = std::max(r.max_mean_gap, std::fabs(mp[i] - mq[i]));
    r.max_variance_gap = std::max(r.max_variance_gap, std::fabs(vp[i] - vq[i]));
    for (std::size_t j = 0; j < pa.dim(); ++j) {
      r.max_product_gap = std::max(r.max_product_gap, std::fabs(ep.at(i, j) - eq.at(i, j)));
    }
  }
  const double a = r.a, eps = r.epsilon;
  r.mean_ok = r.max_mean_gap <= 2.0 * eps * a + kBoundTolerance;
  r.product_ok = r.max_product_gap <= 2.0 * eps * a * a + kBoundTolerance;
  r.variance_ok = r.max_variance_gap <= 6.0 * eps * a * a + kBoundTolerance;
  return r;
}

FiniteJointDistribution random_distribution(std::mt19937_64& rng, std::size_t support,
                                            std::size_t dim, double bound) {
  if (support < 1 || dim < 1) throw std::invalid_argument("support and dim must be >= 1");
  std::uniform_real_distribution<double> coord(-bound, bound);
  std::exponential_distribution<double> weight(1.0);
  Tensor pts({support, dim});
  for (double& v : pts.values()) v = coord(rng);
  std::vector<double> w(support);
  for (double& v : w) v = weight(rng) + 1e-3;
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  // put the rounding residue on the largest mass so the sum is 1 to the last bit
  const auto big = std::max_element(w.begin(), w.end());
  *big += 1.0 - std::accumulate(w.begin(), w.end(), 0.0);
  return FiniteJointDistribution(std::move(pts), std::move(w));
}

std::pair<FiniteJointDistribution, FiniteJointDistribution> random_pair(
    std::mt19937_64& rng, const PairGeneratorConfig& config) {
  if (config.max_dim < 1 || config.max_support < 2) {
    throw std::invalid_argument("pair generator needs max_dim >= 1 and max_support >= 2");
  }
  std::uniform_int_distribution<std::size_t> dim_dist(1, config.max_dim);
  std::uniform_int_distribution<std::size_t> support_dist(2, config.max_support);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (;;) {
    const std::size_t m = dim_dist(rng);
    const std::size_t k = support_dist(rng);
    FiniteJointDistribution p = random_distribution(rng, k, m, config.bound);
    std::vector<double> w = p.masses();
    double budget = config.transfer_budget * unit(rng);
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    const std::size_t transfers = 1 + pick(rng) % 4;
    for (std::size_t t = 0; t < transfers && budget > 0.0; ++t) {
      const std::size_t from = pick(rng), to = pick(rng);
      if (from == to) continue;
      const double amount = std::min(w[from], budget * unit(rng));
      w[from] -= amount;
      w[to] += amount;
      budget -= amount;
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    const auto big = std::max_element(w.begin(), w.end());
    *big += 1.0 - total;
    FiniteJointDistribution q(p.points(), std::move(w));
    const std::vector<double> vp = p.variance(), vq = q.variance();
    const double delta = std::min(*std::min_element(vp.begin(), vp.end()),
                                  *std::min_element(vq.begin(), vq.end()));
    if (delta >= config.min_variance) return {std::move(p), std::move(q)};
  }
}

}  // namespace coda

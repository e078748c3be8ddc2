#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "coda/correlation.hpp"
#include "coda/tensor.hpp"

namespace coda {

/// Distribution over finitely many m-dimensional points.
class FiniteJointDistribution {
 public:
  /// points: K x m; masses: K non-negative values summing to 1 within 1e-12.
  FiniteJointDistribution(Tensor points, std::vector<double> masses);

  const Tensor& points() const { return points_; }
  const std::vector<double>& masses() const { return masses_; }
  std::size_t support_size() const { return masses_.size(); }
  std::size_t dim() const { return points_.cols(); }

  std::vector<double> mean() const;
  /// E[U_i U_j], m x m.
  Tensor second_moment() const;
  /// Population variances D[U_i].
  std::vector<double> variance() const;
  double max_abs_coordinate() const;

 private:
  Tensor points_;
  std::vector<double> masses_;
};

/// Re-expresses both distributions over the union of their supports (missing
/// points get mass 0). Throws ShapeError when the dimensions differ.
std::pair<FiniteJointDistribution, FiniteJointDistribution> align_supports(
    const FiniteJointDistribution& p, const FiniteJointDistribution& q);

/// Half the L1 distance between the mass functions, after support alignment.
double tv_exact(const FiniteJointDistribution& p, const FiniteJointDistribution& q);

/// max over all 2^K events E of |P(E) - Q(E)|. Support size at most 24.
double tv_dual_enumeration(const FiniteJointDistribution& p, const FiniteJointDistribution& q);

/// Exact Pearson matrix from weighted moments. Throws DataError on a coordinate
/// with variance below min_variance.
CorrelationMatrix corr_exact(const FiniteJointDistribution& p,
                             double min_variance = kDefaultMinVariance);

struct BoundReport {
  std::size_t d = 0;
  double epsilon = 0.0;
  double a = 0.0;
  double delta = 0.0;
  double lhs = 0.0;  // induced-1 distance of the correlation matrices
  double rhs = 0.0;
  bool violated = false;
};

/// Checks ||C_P - C_Q|| (induced-1) <= 6 d eps A^2 (1/delta + A^2/delta^2) with
/// exact eps, A (largest |coordinate|) and delta (smallest variance).
BoundReport verify_bound(const FiniteJointDistribution& p, const FiniteJointDistribution& q);

struct Lemma2Report {
  double epsilon = 0.0;
  double a = 0.0;
  double max_mean_gap = 0.0;     // max_i |E U_i - E V_i|
  double max_product_gap = 0.0;  // max_ij |E U_i U_j - E V_i V_j|
  double max_variance_gap = 0.0; // max_i |D U_i - D V_i|
  bool mean_ok = true;           // <= 2 eps A
  bool product_ok = true;        // <= 2 eps A^2
  bool variance_ok = true;       // <= 6 eps A^2
  bool all_ok() const { return mean_ok && product_ok && variance_ok; }
};

Lemma2Report lemma2_check(const FiniteJointDistribution& p, const FiniteJointDistribution& q);

inline constexpr double kBoundTolerance = 1e-9;

struct PairGeneratorConfig {
  std::size_t max_dim = 4;
  std::size_t max_support = 16;
  double bound = 1.0;          // coordinates drawn uniformly from [-bound, bound]
  double transfer_budget = 0.2;
  double min_variance = 1e-3;  // rejection threshold for the variance assumption
};

/// Random base distribution plus a perturbed copy obtained by moving at most
/// `transfer_budget` total mass between support points. Pairs violating the
/// variance assumption are rejected and redrawn.
std::pair<FiniteJointDistribution, FiniteJointDistribution> random_pair(
    std::mt19937_64& rng, const PairGeneratorConfig& config = {});

/// Random distribution with exactly `support` points of dimension `dim`.
FiniteJointDistribution random_distribution(std::mt19937_64& rng, std::size_t support,
                                            std::size_t dim, double bound = 1.0);

}  // namespace coda

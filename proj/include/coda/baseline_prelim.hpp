#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "coda/datasets.hpp"
#include "coda/nn.hpp"

namespace coda {

/// Probability masses on a uniform grid.
struct DensityGrid {
  std::vector<double> points;
  std::vector<double> masses;
  std::vector<double> density;  // kernel density values before renormalisation

  static std::vector<double> uniform_points(double lo = -1.2, double hi = 1.2,
                                            std::size_t count = 256);
};

/// Silverman's rule 1.06 * sd * n^(-1/5) (sample standard deviation).
double silverman_bandwidth(std::span<const double> samples);

/// Gaussian-kernel density evaluated on `grid` and renormalised to sum 1.
/// Without a bandwidth, Silverman's rule is used. Throws std::invalid_argument
/// for fewer than 2 samples or a non-positive bandwidth.
DensityGrid kde_density(std::span<const double> samples, std::optional<double> bandwidth = {},
                        const std::vector<double>& grid = DensityGrid::uniform_points());

inline constexpr double kKlFloor = 1e-12;

/// sum p ln(p / q) with q floored at 1e-12; terms with p == 0 contribute 0.
double kl_grid(const DensityGrid& p, const DensityGrid& q);

/// Sum over features i of KL( P_pred(X_i, Y) || P_truth(X_i, Y) ), where the joint
/// grid for class c is the class-conditional KDE scaled by the class prior.
/// `label_prior` gives P(Y = 0) and P(Y = 1); without it each dataset uses its own
/// class frequencies. Classification only; throws DataError when a class is absent.
double prelim_loss(const DomainDataset& predicted, const DomainDataset& truth,
                   std::optional<std::pair<double, double>> label_prior = {});

/// Differentiable per-feature KDE on the grid with a fixed bandwidth, {1, G}, normalised.
Var kde_grid_var(Var column, double bandwidth, const std::vector<double>& grid);

struct PrelimConfig {
  double learning_rate = 1e-2;
  std::size_t hidden_dim = 16;
  std::size_t code_dim = 4;
  std::size_t decoder_dim = 32;
  std::size_t max_epochs = 300;
  std::size_t patience = 30;
  double tolerance = 1e-5;
  std::size_t grid_points = 64;  // training grid; evaluation uses the default grid
  std::uint64_t seed = 0;
};

/// LSTM over per-domain summary rows (feature means and standard deviations,
/// overall and per class). A decoder maps the hidden state and a fixed per-row
/// code to row features; labels follow the class proportions of the domain
/// being predicted.
class PrelimGenerator {
 public:
  /// Needs at least three source domains of a classification stream.
  static PrelimGenerator train(const DomainStream& stream, const PrelimConfig& config);

  /// Synthetic D_{T+1} with as many rows as the last source domain.
  DomainDataset generate() const { return generated_; }
  std::size_t epochs() const { return epochs_; }
  double best_loss() const { return best_loss_; }

 private:
  DomainDataset generated_ = DomainDataset(0, Tensor({2, 1}), {0.0, 1.0}, Task::kClassification);
  std::size_t epochs_ = 0;
  double best_loss_ = 0.0;
};

/// Summary row used as the recurrent input for one domain.
Tensor domain_summary(const DomainDataset& data);

/// Writes `grid,mass` rows.
void write_density_csv(std::ostream& out, const DensityGrid& g);

}  // namespace coda

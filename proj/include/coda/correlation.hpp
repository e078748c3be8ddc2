#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "coda/datasets.hpp"
#include "coda/ops.hpp"
#include "coda/tensor.hpp"

namespace coda {

inline constexpr double kDefaultMinVariance = 1e-8;

/// Symmetric m x m matrix with unit diagonal and entries in [-1, 1].
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;

  /// Validates the invariants (symmetry within 1e-12, unit diagonal, range).
  /// Throws ShapeError or std::invalid_argument.
  explicit CorrelationMatrix(Tensor values, std::vector<std::string> names = {});

  /// Symmetrises (mean of the two triangles), clamps to [-1, 1] and sets the
  /// diagonal to 1 before validating.
  static CorrelationMatrix repair(Tensor values, std::vector<std::string> names = {});
  static CorrelationMatrix identity(std::size_t m);

  std::size_t dim() const { return values_.rows(); }
  double at(std::size_t i, std::size_t j) const { return values_.at(i, j); }
  const Tensor& values() const { return values_; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  Tensor values_;
  std::vector<std::string> names_;
};

bool operator==(const CorrelationMatrix& a, const CorrelationMatrix& b);

/// Sample Pearson matrix (n - 1 denominator) over the columns of `columns`.
/// Throws DataError naming the first column whose variance is below min_variance.
CorrelationMatrix pearson_matrix(const Tensor& columns, std::vector<std::string> names = {},
                                 double min_variance = kDefaultMinVariance);

/// Pearson matrix of [X | y]; m = d + 1 with the label last.
CorrelationMatrix pearson_matrix(const DomainDataset& data,
                                 double min_variance = kDefaultMinVariance);

enum class MatrixNorm { kElementwiseL1, kFrobenius, kInduced1 };

std::string to_string(MatrixNorm norm);

double matrix_distance(const Tensor& a, const Tensor& b, MatrixNorm norm);
double matrix_distance(const CorrelationMatrix& a, const CorrelationMatrix& b, MatrixNorm norm);

/// Strict upper triangle in row-major order, length m(m-1)/2.
std::vector<double> flatten_upper(const CorrelationMatrix& c);
/// Inverse of flatten_upper. Entries are clamped to [-1, 1].
CorrelationMatrix unflatten_upper(std::span<const double> v, std::size_t m);
std::size_t upper_count(std::size_t m);

/// Header row of names followed by m rows of entries.
void write_matrix_csv(std::ostream& out, const CorrelationMatrix& c);

/// Differentiable Pearson matrix of a batch (rows x m). The per-column standard
/// deviation is sqrt(var + eps_var), so the diagonal is var / (var + eps_var).
Var batch_pearson(Var batch, double eps_var = 1e-6);

}  // namespace coda

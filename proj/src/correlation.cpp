#include "coda/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace coda {

CorrelationMatrix::CorrelationMatrix(Tensor values, std::vector<std::string> names)
    : values_(std::move(values)), names_(std::move(names)) {
  if (values_.rank() != 2 || values_.rows() != values_.cols()) {
    throw ShapeError("correlation matrix must be square, got " + to_string(values_.shape()));
  }
  const std::size_t m = values_.rows();
  for (std::size_t i = 0; i < m; ++i) {
    if (values_.at(i, i) != 1.0) throw std::invalid_argument("correlation diagonal must be 1");
    for (std::size_t j = 0; j < m; ++j) {
      const double v = values_.at(i, j);
      if (!(v >= -1.0 && v <= 1.0)) {
        throw std::invalid_argument("correlation entry out of [-1, 1]");
      }
      if (std::fabs(v - values_.at(j, i)) > 1e-12) {
        throw std::invalid_argument("correlation matrix is not symmetric");
      }
    }
  }
  if (names_.empty()) {
    for (std::size_t i = 0; i < m; ++i) names_.push_back("c" + std::to_string(i));
  } else if (names_.size() != m) {
    throw ShapeError("correlation name count does not match dimension");
  }
}

CorrelationMatrix CorrelationMatrix::repair(Tensor values, std::vector<std::string> names) {
  if (values.rank() != 2 || values.rows() != values.cols()) {
    throw ShapeError("correlation matrix must be square, got " + to_string(values.shape()));
  }
  const std::size_t m = values.rows();
  for (std::size_t i = 0; i < m; ++i) {
    values.at(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      double v = 0.5 * (values.at(i, j) + values.at(j, i));
      v = std::isfinite(v) ? std::clamp(v, -1.0, 1.0) : 0.0;
      values.at(i, j) = v;
      values.at(j, i) = v;
    }
  }
  return CorrelationMatrix(std::move(values), std::move(names));
}

CorrelationMatrix CorrelationMatrix::identity(std::size_t m) {
  Tensor t({m, m});
  for (std::size_t i = 0; i < m; ++i) t.at(i, i) = 1.0;
  return CorrelationMatrix(std::move(t));
}

bool operator==(const CorrelationMatrix& a, const CorrelationMatrix& b) {
  return same_shape(a.values(), b.values()) && a.values().values() == b.values().values();
}

CorrelationMatrix pearson_matrix(const Tensor& columns, std::vector<std::string> names,
                                 double min_variance) {
  if (columns.rank() != 2 || columns.rows() < 2) {
    throw ShapeError("pearson needs a matrix with at least 2 rows");
  }
  const std::size_t n = columns.rows(), m = columns.cols();
  if (!names.empty() && names.size() != m) throw ShapeError("name count does not match columns");
  std::vector<double> mean(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) mean[j] += columns.at(i, j);
  }
  for (double& v : mean) v /= static_cast<double>(n);

  Tensor cov({m, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < m; ++a) {
      const double da = columns.at(i, a) - mean[a];
      for (std::size_t b = a; b < m; ++b) cov.at(a, b) += da * (columns.at(i, b) - mean[b]);
    }
  }
  const double denom = static_cast<double>(n - 1);
  std::vector<double> sd(m);
  for (std::size_t a = 0; a < m; ++a) {
    const double var = cov.at(a, a) / denom;
    if (!(var >= min_variance)) {
      const std::string name = names.empty() ? "column " + std::to_string(a) : names[a];
      std::ostringstream msg;
      msg << "near-constant column '" << name << "' (variance " << var << " < " << min_variance
          << ")";
      throw DataError(msg.str());
    }
    sd[a] = std::sqrt(var);
  }
  Tensor c({m, m});
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      const double r = cov.at(a, b) / denom / (sd[a] * sd[b]);
      c.at(a, b) = r;
      c.at(b, a) = r;
    }
  }
  return CorrelationMatrix::repair(std::move(c), std::move(names));
}

CorrelationMatrix pearson_matrix(const DomainDataset& data, double min_variance) {
  std::vector<std::string> names = data.feature_names();
  names.push_back("label");
  return pearson_matrix(data.joint_matrix(), std::move(names), min_variance);
}

std::string to_string(MatrixNorm norm) {
  switch (norm) {
    case MatrixNorm::kElementwiseL1: return "elementwise-l1";
    case MatrixNorm::kFrobenius: return "frobenius";
    case MatrixNorm::kInduced1: return "induced-1";
  }
  return "?";
}

double matrix_distance(const Tensor& a, const Tensor& b, MatrixNorm norm) {
  if (!same_shape(a, b) || a.rank() != 2) {
    throw ShapeError("matrix_distance: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  switch (norm) {
    case MatrixNorm::kElementwiseL1: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
      return s;
    }
    case MatrixNorm::kFrobenius: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return std::sqrt(s);
    }
    case MatrixNorm::kInduced1: {
      double best = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) col += std::fabs(a.at(i, j) - b.at(i, j));
        best = std::max(best, col);
      }
      return best;
    }
  }
  return 0.0;
}

double matrix_distance(const CorrelationMatrix& a, const CorrelationMatrix& b, MatrixNorm norm) {
  if (a.dim() != b.dim()) {
    throw ShapeError("correlation dims differ: " + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.dim()));
  }
  return matrix_distance(a.values(), b.values(), norm);
}

std::size_t upper_count(std::size_t m) { return m * (m - 1) / 2; }

std::vector<double> flatten_upper(const CorrelationMatrix& c) {
  std::vector<double> v;
  v.reserve(upper_count(c.dim()));
  for (std::size_t i = 0; i < c.dim(); ++i) {
    for (std::size_t j = i + 1; j < c.dim(); ++j) v.push_back(c.at(i, j));
  }
  return v;
}

CorrelationMatrix unflatten_upper(std::span<const double> v, std::size_t m) {
  if (m < 1 || v.size() != upper_count(m)) {
    throw ShapeError("unflatten: length " + std::to_string(v.size()) + " does not match m=" +
                     std::to_string(m));
  }
  Tensor t({m, m});
  std::size_t k = 0;
  for (std::size_t i = 0; i < m; ++i) {
    t.at(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      const double x = std::isfinite(v[k]) ? std::clamp(v[k], -1.0, 1.0) : 0.0;
      ++k;
      t.at(i, j) = x;
      t.at(j, i) = x;
    }
  }
  return CorrelationMatrix(std::move(t));
}

void write_matrix_csv(std::ostream& out, const CorrelationMatrix& c) {
  const auto& names = c.names();
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  std::ostringstream row;
  row.precision(17);
  for (std::size_t i = 0; i < c.dim(); ++i) {
    row.str({});
    for (std::size_t j = 0; j < c.dim(); ++j) row << (j ? "," : "") << c.at(i, j);
    out << row.str() << '\n';
  }
}

Var batch_pearson(Var batch, double eps_var) {
  const std::size_t n = batch.shape()[0];
  if (n < 2) throw ShapeError("batch_pearson needs at least 2 rows");
  const double denom = 1.0 / static_cast<double>(n - 1);
  Var centered = batch - ops::mean_rows(batch);
  Var cov = ops::scale(ops::matmul(ops::transpose(centered), centered), denom);
  Var var = ops::scale(ops::sum_rows(ops::square(centered)), denom);
  Var sd = ops::sqrt(ops::add_scalar(var, eps_var));
  return cov / ops::matmul(ops::transpose(sd), sd);
}

}  // namespace coda

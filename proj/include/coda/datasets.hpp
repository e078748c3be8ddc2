#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "coda/tensor.hpp"

namespace coda {

enum class Task { kClassification, kRegression };

std::string to_string(Task task);
Task parse_task(const std::string& name);

/// Thrown for malformed or inconsistent input data (CSV contents, schemas).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One time-indexed tabular domain. Immutable after construction.
///
/// Invariants: at least two rows, all entries finite, classification labels in {0, 1}.
class DomainDataset {
 public:
  DomainDataset(int domain_index, Tensor features, std::vector<double> labels, Task task,
                std::vector<std::string> feature_names = {});

  int domain_index() const { return domain_index_; }
  const Tensor& features() const { return features_; }
  const std::vector<double>& labels() const { return labels_; }
  Task task() const { return task_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  std::size_t rows() const { return features_.rows(); }
  std::size_t feature_count() const { return features_.cols(); }

  /// Rows as [features | label], N x (d + 1).
  Tensor joint_matrix() const;

  DomainDataset with_index(int domain_index) const;

 private:
  int domain_index_;
  Tensor features_;
  std::vector<double> labels_;
  Task task_;
  std::vector<std::string> feature_names_;
};

/// Concatenates rows of datasets sharing a feature layout; tagged with the last index.
DomainDataset concat_domains(const std::vector<DomainDataset>& domains);

/// Wrapper that keeps the future domain out of reach of training code.
/// The only accessor is explicit about its purpose.
class HeldOutDomain {
 public:
  explicit HeldOutDomain(DomainDataset target) : target_(std::move(target)) {}
  const DomainDataset& reveal_for_evaluation() const { return target_; }
  int domain_index() const { return target_.domain_index(); }
  std::size_t rows() const { return target_.rows(); }

 private:
  DomainDataset target_;
};

/// Chronological source domains plus the held-out target domain.
struct DomainStream {
  std::vector<DomainDataset> sources;
  HeldOutDomain target;

  /// Validates ordering and shared layout. Throws DataError.
  static DomainStream create(std::vector<DomainDataset> sources, DomainDataset target);

  std::size_t feature_count() const { return sources.front().feature_count(); }
  Task task() const { return sources.front().task(); }
  const DomainDataset& last_source() const { return sources.back(); }

  /// Drops the target and promotes the last source to target. Used for
  /// validation splits; needs at least three sources.
  DomainStream validation_split() const;
};

// ---- rotating two-moons ----------------------------------------------------

inline constexpr double kMoonsDegreesPerDomain = 18.0;
inline constexpr double kMoonsDefaultNoise = 0.1;

/// n points (half per moon) rotated counter-clockwise by 18 * domain_index degrees
/// about the origin of the canonical moon frame. Lower moon labelled 0, upper 1.
/// The same seed draws the same canonical points regardless of domain_index.
DomainDataset make_moons_domain(std::size_t n, int domain_index, double noise_std,
                                std::uint64_t seed);

/// Domains 0..domains-1, each drawn with its own derived seed; the last is the target.
DomainStream make_moons_stream(std::size_t domains, std::size_t n_per_domain, double noise_std,
                               std::uint64_t seed);

// ---- CSV ingestion ---------------------------------------------------------

struct CsvSchema {
  std::string domain_column = "domain";
  std::string label_column = "label";
  /// Empty means every remaining column is a feature.
  std::vector<std::string> feature_columns;
  Task task = Task::kClassification;
};

/// Groups rows by integer domain index (ascending); the last domain is held out.
DomainStream load_csv_stream(const std::filesystem::path& path, const CsvSchema& schema);
DomainStream parse_csv_stream(std::istream& in, const CsvSchema& schema,
                              const std::string& source_name = "<stream>");

/// Writes rows as `domain,<features...>,label` with a header.
void write_domain_csv(std::ostream& out, const DomainDataset& data,
                      const std::string& domain_column = "domain",
                      const std::string& label_column = "label");

// ---- normalisation ---------------------------------------------------------

enum class NormalizationMethod { kMinMax, kZScore };

/// Per-column affine map fit on source domains only: x' = (x - offset) / scale.
struct NormalizationStats {
  NormalizationMethod method = NormalizationMethod::kMinMax;
  std::vector<std::size_t> kept_columns;        // indices into the raw feature columns
  std::vector<std::string> kept_names;
  std::vector<std::string> dropped_names;       // constant columns
  std::vector<double> offset, scale;            // per kept column
  bool label_normalized = false;                // regression labels share the map
  double label_offset = 0.0, label_scale = 1.0;

  DomainDataset apply(const DomainDataset& raw) const;
  /// Inverse map on kept feature columns (rows x kept).
  Tensor invert_features(const Tensor& normalized) const;
  double invert_label(double normalized) const;
};

struct NormalizedStream {
  DomainStream stream;
  NormalizationStats stats;
};

/// Fits on the sources, applies the same map to every domain, drops constant
/// columns. Throws DataError when every feature column is constant.
NormalizedStream fit_apply_normalization(const DomainStream& stream,
                                         NormalizationMethod method = NormalizationMethod::kMinMax);

}  // namespace coda

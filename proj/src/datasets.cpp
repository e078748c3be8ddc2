#include "coda/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "coda/nn.hpp"

namespace coda {

std::string to_string(Task task) {
  return task == Task::kClassification ? "classification" : "regression";
}

Task parse_task(const std::string& name) {
  if (name == "classification") return Task::kClassification;
  if (name == "regression") return Task::kRegression;
  throw DataError("unknown task '" + name + "' (expected classification or regression)");
}

DomainDataset::DomainDataset(int domain_index, Tensor features, std::vector<double> labels,
                             Task task, std::vector<std::string> feature_names)
    : domain_index_(domain_index),
      features_(std::move(features)),
      labels_(std::move(labels)),
      task_(task),
      feature_names_(std::move(feature_names)) {
  if (features_.rank() != 2) throw ShapeError("features must be a matrix");
  if (features_.rows() < 2) {
    throw DataError("domain " + std::to_string(domain_index_) + " needs at least 2 rows");
  }
  if (labels_.size() != features_.rows()) {
    throw ShapeError("domain " + std::to_string(domain_index_) + ": " +
                     std::to_string(labels_.size()) + " labels for " +
                     std::to_string(features_.rows()) + " rows");
  }
  if (!features_.all_finite()) {
    throw DataError("domain " + std::to_string(domain_index_) + " has non-finite features");
  }
  for (double y : labels_) {
    if (!std::isfinite(y)) {
      throw DataError("domain " + std::to_string(domain_index_) + " has non-finite labels");
    }
    if (task_ == Task::kClassification && y != 0.0 && y != 1.0) {
      throw DataError("domain " + std::to_string(domain_index_) +
                      ": classification labels must be 0 or 1");
    }
  }
  if (feature_names_.empty()) {
    for (std::size_t j = 0; j < features_.cols(); ++j) {
      feature_names_.push_back("x" + std::to_string(j + 1));
    }
  } else if (feature_names_.size() != features_.cols()) {
    throw ShapeError("feature name count does not match feature columns");
  }
}

Tensor DomainDataset::joint_matrix() const {
  const std::size_t n = rows(), d = feature_count();
  Tensor out({n, d + 1});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = features_.at(i, j);
    out.at(i, d) = labels_[i];
  }
  return out;
}

DomainDataset DomainDataset::with_index(int domain_index) const {
  return DomainDataset(domain_index, features_, labels_, task_, feature_names_);
}

DomainDataset concat_domains(const std::vector<DomainDataset>& domains) {
  if (domains.empty()) throw DataError("nothing to concatenate");
  const std::size_t d = domains.front().feature_count();
  std::vector<double> x, y;
  for (const DomainDataset& dom : domains) {
    if (dom.feature_count() != d) throw ShapeError("feature count differs between domains");
    x.insert(x.end(), dom.features().values().begin(), dom.features().values().end());
    y.insert(y.end(), dom.labels().begin(), dom.labels().end());
  }
  const std::size_t n = y.size();
  return DomainDataset(domains.back().domain_index(), Tensor({n, d}, std::move(x)), std::move(y),
                       domains.front().task(), domains.front().feature_names());
}

DomainStream DomainStream::create(std::vector<DomainDataset> sources, DomainDataset target) {
  if (sources.empty()) throw DataError("stream needs at least one source domain");
  const std::size_t d = sources.front().feature_count();
  const Task task = sources.front().task();
  int prev = sources.front().domain_index() - 1;
  auto check = [&](const DomainDataset& dom) {
    if (dom.feature_count() != d) {
      throw DataError("domain " + std::to_string(dom.domain_index()) + " has " +
                      std::to_string(dom.feature_count()) + " features, expected " +
                      std::to_string(d));
    }
    if (dom.task() != task) throw DataError("domains disagree on the task type");
    if (dom.domain_index() <= prev) throw DataError("domains must be in increasing index order");
    prev = dom.domain_index();
  };
  for (const DomainDataset& s : sources) check(s);
  check(target);
  return DomainStream{std::move(sources), HeldOutDomain(std::move(target))};
}

DomainStream DomainStream::validation_split() const {
  if (sources.size() < 3) throw DataError("validation split needs at least three sources");
  std::vector<DomainDataset> head(sources.begin(), sources.end() - 1);
  return create(std::move(head), sources.back());
}

// ---- moons ------------------------------------------------------------------

DomainDataset make_moons_domain(std::size_t n, int domain_index, double noise_std,
                                std::uint64_t seed) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("moons: n must be even and >= 2");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("moons: noise_std must be >= 0");
  Rng rng(seed);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double theta = kMoonsDegreesPerDomain * domain_index * std::numbers::pi / 180.0;
  const double ct = std::cos(theta), st = std::sin(theta);

  Tensor x({n, 2});
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool upper = i < n / 2;
    const double t = angle(rng);
    double px = upper ? std::cos(t) : 1.0 - std::cos(t);
    double py = upper ? std::sin(t) : 0.5 - std::sin(t);
    // draw noise even when it is zero so the canonical points stay aligned
    const double ex = noise(rng), ey = noise(rng);
    px += noise_std * ex;
    py += noise_std * ey;
    x.at(i, 0) = ct * px - st * py;
    x.at(i, 1) = st * px + ct * py;
    y[i] = upper ? 1.0 : 0.0;
  }
  return DomainDataset(domain_index, std::move(x), std::move(y), Task::kClassification);
}

DomainStream make_moons_stream(std::size_t domains, std::size_t n_per_domain, double noise_std,
                               std::uint64_t seed) {
  if (domains < 3) throw std::invalid_argument("moons stream needs at least 3 domains");
  std::vector<DomainDataset> all;
  for (std::size_t i = 0; i < domains; ++i) {
    all.push_back(make_moons_domain(n_per_domain, static_cast<int>(i), noise_std,
                                    derive_seed(seed, i)));
  }
  DomainDataset target = all.back();
  all.pop_back();
  return DomainStream::create(std::move(all), std::move(target));
}

// ---- CSV --------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

DomainStream parse_csv_stream(std::istream& in, const CsvSchema& schema,
                              const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw DataError(source_name + ": empty file");

  auto find_col = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(source_name + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t dom_col = find_col(schema.domain_column);
  const std::size_t lab_col = find_col(schema.label_column);
  std::vector<std::size_t> feat_cols;
  std::vector<std::string> feat_names;
  if (schema.feature_columns.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (j != dom_col && j != lab_col) {
        feat_cols.push_back(j);
        feat_names.push_back(header[j]);
      }
    }
  } else {
    for (const std::string& name : schema.feature_columns) {
      feat_cols.push_back(find_col(name));
      feat_names.push_back(name);
    }
  }
  if (feat_cols.empty()) throw DataError(source_name + ": no feature columns");

  struct Rows {
    std::vector<double> x, y;
  };
  std::map<int, Rows> by_domain;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(source_name + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    auto number = [&](std::size_t col) {
      double v = 0.0;
      if (!parse_double(cells[col], v)) {
        throw DataError(source_name + ": line " + std::to_string(line_no) + ", column '" +
                        header[col] + "': '" + cells[col] + "' is not a finite number");
      }
      return v;
    };
    const double dom = number(dom_col);
    if (dom != std::floor(dom) || std::fabs(dom) > 1e9) {
      throw DataError(source_name + ": line " + std::to_string(line_no) +
                      ": domain index must be an integer");
    }
    Rows& rows = by_domain[static_cast<int>(dom)];
    for (std::size_t c : feat_cols) rows.x.push_back(number(c));
    const double label = number(lab_col);
    if (schema.task == Task::kClassification && label != 0.0 && label != 1.0) {
      throw DataError(source_name + ": line " + std::to_string(line_no) + ", column '" +
                      header[lab_col] + "': classification label must be 0 or 1");
    }
    rows.y.push_back(label);
  }
  if (by_domain.empty()) throw DataError(source_name + ": no data rows");
  if (by_domain.size() < 2) {
    throw DataError(source_name + ": need at least two domains (sources plus a target)");
  }

  std::vector<DomainDataset> domains;
  for (auto& [idx, rows] : by_domain) {
    const std::size_t n = rows.y.size();
    if (n < 2) {
      throw DataError(source_name + ": domain " + std::to_string(idx) +
                      " has fewer than 2 rows");
    }
    domains.emplace_back(idx, Tensor({n, feat_cols.size()}, std::move(rows.x)),
                         std::move(rows.y), schema.task, feat_names);
  }
  DomainDataset target = domains.back();
  domains.pop_back();
  return DomainStream::create(std::move(domains), std::move(target));
}

DomainStream load_csv_stream(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_csv_stream(in, schema, path.string());
}

void write_domain_csv(std::ostream& out, const DomainDataset& data,
                      const std::string& domain_column, const std::string& label_column) {
  out << domain_column;
  for (const std::string& name : data.feature_names()) out << ',' << name;
  out << ',' << label_column << '\n';
  std::ostringstream row;
  row.precision(17);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    row.str({});
    row << data.domain_index();
    for (std::size_t j = 0; j < data.feature_count(); ++j) row << ',' << data.features().at(i, j);
    row << ',' << data.labels()[i] << '\n';
    out << row.str();
  }
}

// ---- normalisation ----------------------------------------------------------

DomainDataset NormalizationStats::apply(const DomainDataset& raw) const {
  const std::size_t n = raw.rows(), k = kept_columns.size();
  Tensor x({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      x.at(i, j) = (raw.features().at(i, kept_columns[j]) - offset[j]) / scale[j];
    }
  }
  std::vector<double> y = raw.labels();
  if (label_normalized) {
    for (double& v : y) v = (v - label_offset) / label_scale;
  }
  return DomainDataset(raw.domain_index(), std::move(x), std::move(y), raw.task(), kept_names);
}

Tensor NormalizationStats::invert_features(const Tensor& normalized) const {
  if (normalized.cols() != kept_columns.size()) {
    throw ShapeError("invert_features: expected " + std::to_string(kept_columns.size()) +
                     " columns");
  }
  Tensor out = normalized;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      out.at(i, j) = out.at(i, j) * scale[j] + offset[j];
    }
  }
  return out;
}

double NormalizationStats::invert_label(double normalized) const {
  return label_normalized ? normalized * label_scale + label_offset : normalized;
}

namespace {

// Returns (offset, scale) for the column; scale == 0 marks a constant column.
std::pair<double, double> fit_column(const std::vector<double>& v, NormalizationMethod method) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*hi - *lo <= 1e-12 * std::max(1.0, std::fabs(*hi))) return {*lo, 0.0};
  if (method == NormalizationMethod::kMinMax) {
    // maps [min, max] onto [-1, 1]
    return {0.5 * (*lo + *hi), 0.5 * (*hi - *lo)};
  }
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return {mean, std::sqrt(var)};
}

}  // namespace

NormalizedStream fit_apply_normalization(const DomainStream& stream, NormalizationMethod method) {
  const std::size_t d = stream.feature_count();
  NormalizationStats stats;
  stats.method = method;
  const std::vector<std::string>& names = stream.sources.front().feature_names();
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> col;
    for (const DomainDataset& s : stream.sources) {
      for (std::size_t i = 0; i < s.rows(); ++i) col.push_back(s.features().at(i, j));
    }
    const auto [off, sc] = fit_column(col, method);
    if (sc == 0.0) {
      stats.dropped_names.push_back(names[j]);
      continue;
    }
    stats.kept_columns.push_back(j);
    stats.kept_names.push_back(names[j]);
    stats.offset.push_back(off);
    stats.scale.push_back(sc);
  }
  if (stats.kept_columns.empty()) throw DataError("every feature column is constant");
  if (stream.task() == Task::kRegression) {
    std::vector<double> ys;
    for (const DomainDataset& s : stream.sources) {
      ys.insert(ys.end(), s.labels().begin(), s.labels().end());
    }
    const auto [off, sc] = fit_column(ys, method);
    stats.label_normalized = true;
    stats.label_offset = off;
    stats.label_scale = sc == 0.0 ? 1.0 : sc;
  }

  std::vector<DomainDataset> sources;
  for (const DomainDataset& s : stream.sources) sources.push_back(stats.apply(s));
  DomainDataset target = stats.apply(stream.target.reveal_for_evaluation());
  return {DomainStream::create(std::move(sources), std::move(target)), std::move(stats)};
}

}  // namespace coda

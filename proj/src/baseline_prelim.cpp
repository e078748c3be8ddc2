#include "coda/baseline_prelim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "coda/diffcore.hpp"

namespace coda {

std::vector<double> DensityGrid::uniform_points(double lo, double hi, std::size_t count) {
  if (count < 2 || !(hi > lo)) throw std::invalid_argument("grid needs >= 2 points and hi > lo");
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i) {
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return g;
}

double silverman_bandwidth(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("bandwidth needs at least 2 samples");
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : samples) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n - 1);
  return 1.06 * std::sqrt(var) * std::pow(static_cast<double>(n), -0.2);
}

DensityGrid kde_density(std::span<const double> samples, std::optional<double> bandwidth,
                        const std::vector<double>& grid) {
  if (samples.size() < 2) throw std::invalid_argument("kde needs at least 2 samples");
  const double h = bandwidth ? *bandwidth : silverman_bandwidth(samples);
  if (!(h > 0.0)) throw std::invalid_argument("kde bandwidth must be > 0");
  DensityGrid out{grid, std::vector<double>(grid.size(), 0.0), {}};
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  double total = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (double x : samples) {
      const double u = (grid[g] - x) / h;
      s += std::exp(-0.5 * u * u);
    }
    out.masses[g] = s * norm;
    total += out.masses[g];
  }
  if (!(total > 0.0)) throw NumericError("kde mass vanished on the grid");
  out.density = out.masses;
  for (double& m : out.masses) m /= total;
  return out;
}

double kl_grid(const DensityGrid& p, const DensityGrid& q) {
  if (p.points != q.points || p.masses.size() != q.masses.size()) {
    throw ShapeError("kl_grid: grids differ");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.masses.size(); ++i) {
    const double pi = p.masses[i];
    if (pi <= 0.0) continue;
    kl += pi * std::log(pi / std::max(q.masses[i], kKlFloor));
  }
  return std::max(kl, 0.0);
}

namespace {

std::vector<double> class_column(const DomainDataset& d, std::size_t feature, double label) {
  std::vector<double> out;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    if (d.labels()[i] == label) out.push_back(d.features().at(i, feature));
  }
  return out;
}

std::pair<double, double> class_frequencies(const DomainDataset& d) {
  double ones = 0.0;
  for (double y : d.labels()) ones += y;
  const double p1 = ones / static_cast<double>(d.rows());
  return {1.0 - p1, p1};
}

}  // namespace

double prelim_loss(const DomainDataset& predicted, const DomainDataset& truth,
                   std::optional<std::pair<double, double>> label_prior) {
  if (predicted.feature_count() != truth.feature_count()) {
    throw ShapeError("prelim_loss: feature counts differ");
  }
  if (predicted.task() != Task::kClassification || truth.task() != Task::kClassification) {
    throw DataError("prelim_loss is defined for classification domains");
  }
  const auto prior_p = label_prior.value_or(class_frequencies(predicted));
  const auto prior_q = label_prior.value_or(class_frequencies(truth));
  const std::vector<double> grid = DensityGrid::uniform_points();
  double total = 0.0;
  for (std::size_t i = 0; i < truth.feature_count(); ++i) {
    // joint grid over (x_i, y): the two class blocks side by side
    DensityGrid p{grid, {}, {}}, q{grid, {}, {}};
    std::vector<double> joint_points;
    for (int c = 0; c < 2; ++c) {
      const auto xp = class_column(predicted, i, c);
      const auto xq = class_column(truth, i, c);
      if (xp.size() < 2 || xq.size() < 2) {
        throw DataError("prelim_loss: label class " + std::to_string(c) +
                        " is missing (needs at least 2 rows in each dataset)");
      }
      const DensityGrid dp = kde_density(xp, {}, grid);
      const DensityGrid dq = kde_density(xq, {}, grid);
      const double wp = c == 0 ? prior_p.first : prior_p.second;
      const double wq = c == 0 ? prior_q.first : prior_q.second;
      for (std::size_t g = 0; g < grid.size(); ++g) {
        p.masses.push_back(dp.masses[g] * wp);
        q.masses.push_back(dq.masses[g] * wq);
        joint_points.push_back(grid[g] + 10.0 * c);
      }
    }
    p.points = joint_points;
    q.points = joint_points;
    total += kl_grid(p, q);
  }
  return total;
}

Var kde_grid_var(Var column, double bandwidth, const std::vector<double>& grid) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("kde bandwidth must be > 0");
  const Tensor& x = column.value();
  const std::size_t n = x.size(), g = grid.size();
  const double inv_h2 = 1.0 / (bandwidth * bandwidth);
  Tensor kern({1, g});
  for (std::size_t j = 0; j < g; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double u = grid[j] - x[r];
      s += std::exp(-0.5 * u * u * inv_h2);
    }
    kern[j] = s;
  }
  const std::size_t ix = column.id();
  const std::array inputs{column};
  Var sums = column.tape()->record(std::move(kern), inputs, [=](Tape& t, std::size_t self) {
    const Tensor& xv = t.value(ix);
    const Tensor& gr = t.grad(self);
    Tensor& gx = t.grad_buffer(ix);
    for (std::size_t r = 0; r < n; ++r) {
      double acc = 0.0;
      for (std::size_t j = 0; j < g; ++j) {
        const double u = grid[j] - xv[r];
        acc += gr[j] * std::exp(-0.5 * u * u * inv_h2) * u * inv_h2;
      }
      gx[r] += acc;
    }
  });
  return sums / ops::sum(sums);
}

Tensor domain_summary(const DomainDataset& data) {
  const std::size_t d = data.feature_count(), n = data.rows();
  Tensor s({1, 4 * d});
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0, m0 = 0.0, m1 = 0.0, n0 = 0.0, n1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = data.features().at(i, j);
      mean += x;
      if (data.labels()[i] > 0.5) {
        m1 += x;
        n1 += 1.0;
      } else {
        m0 += x;
        n0 += 1.0;
      }
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = data.features().at(i, j) - mean;
      var += c * c;
    }
    s[j] = mean;
    s[d + j] = std::sqrt(var / static_cast<double>(n - 1));
    s[2 * d + j] = n0 > 0 ? m0 / n0 : mean;
    s[3 * d + j] = n1 > 0 ? m1 / n1 : mean;
  }
  return s;
}

namespace {

struct PrelimNet {
  LstmLayer cell;
  Mlp decoder;
  std::size_t hidden = 0;
};

std::size_t count_ones(std::size_t n, double p1) {
  const auto k = static_cast<std::size_t>(std::llround(p1 * static_cast<double>(n)));
  return std::min(k, n);
}

// Rows [0, n - ones) carry label 0, the rest label 1.
Var decode_rows(const PrelimNet& net, std::span<const Var> params, Var h, Var codes) {
  Tape& tape = *h.tape();
  const std::size_t n = codes.shape()[0];
  Var rep = ops::matmul(tape.constant(Tensor({n, 1}, 1.0)), h);
  const std::array parts{rep, codes};
  return ops::tanh(net.decoder.forward(params, ops::concat_cols(parts)));
}

}  // namespace

PrelimGenerator PrelimGenerator::train(const DomainStream& stream, const PrelimConfig& config) {
  if (stream.sources.size() < 3) throw std::invalid_argument("prelim needs >= 3 source domains");
  if (stream.task() != Task::kClassification) {
    throw DataError("prelim baseline supports classification streams");
  }
  const std::size_t d = stream.feature_count();
  const std::size_t n = stream.last_source().rows();
  const std::vector<double> grid = DensityGrid::uniform_points(-1.2, 1.2, config.grid_points);

  Rng rng(derive_seed(config.seed, 0x7072656c));
  ParamList params;
  PrelimNet net;
  net.hidden = config.hidden_dim;
  net.cell = LstmLayer::create(params, 4 * d, config.hidden_dim, rng);
  const std::array dims{config.hidden_dim + config.code_dim, config.decoder_dim,
                        config.decoder_dim, d};
  net.decoder = Mlp::create(params, dims, Activation::kRelu, rng);
  const Tensor codes = normal_tensor({n, config.code_dim}, rng);

  // constant truth grids per step: [t][feature][class]
  struct StepTarget {
    std::vector<std::array<Tensor, 2>> grids;
    std::vector<std::array<double, 2>> bandwidth;
    std::size_t ones = 0;
    std::array<double, 2> prior{};
  };
  std::vector<StepTarget> targets;
  std::vector<Tensor> summaries;
  for (const DomainDataset& s : stream.sources) summaries.push_back(domain_summary(s));
  for (std::size_t t = 1; t < stream.sources.size(); ++t) {
    const DomainDataset& dom = stream.sources[t];
    StepTarget st;
    const auto [p0, p1] = class_frequencies(dom);
    st.prior = {p0, p1};
    st.ones = count_ones(n, p1);
    if (st.ones < 2 || n - st.ones < 2) throw DataError("prelim: a class has fewer than 2 rows");
    for (std::size_t i = 0; i < d; ++i) {
      std::array<Tensor, 2> g;
      std::array<double, 2> bw{};
      for (int c = 0; c < 2; ++c) {
        const auto col = class_column(dom, i, c);
        bw[c] = silverman_bandwidth(col);
        if (!(bw[c] > 0.0)) bw[c] = 1e-2;
        g[c] = Tensor({1, grid.size()}, kde_density(col, bw[c], grid).masses);
      }
      st.grids.push_back(g);
      st.bandwidth.push_back(bw);
    }
    targets.push_back(std::move(st));
  }

  auto run_steps = [&](Tape& tape, std::span<const Var> p, std::size_t upto,
                       std::vector<Var>& hidden_states) {
    LstmLayer::State s{tape.constant(Tensor({1, net.hidden})),
                       tape.constant(Tensor({1, net.hidden}))};
    for (std::size_t t = 0; t < upto; ++t) {
      s = net.cell.step(p, tape.constant(summaries[t]), s);
      hidden_states.push_back(s.h);
    }
  };

  GraphFn graph = [&](Tape& tape, std::span<const Var> p, std::span<const Var>) {
    std::vector<Var> hs;
    run_steps(tape, p, summaries.size() - 1, hs);
    Var codes_v = tape.constant(codes);
    Var total;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const StepTarget& st = targets[t];
      Var rows = decode_rows(net, p, hs[t], codes_v);
      const std::array<Var, 2> blocks{ops::slice_rows(rows, 0, n - st.ones),
                                      ops::slice_rows(rows, n - st.ones, n)};
      for (std::size_t i = 0; i < d; ++i) {
        for (int c = 0; c < 2; ++c) {
          Var col = ops::slice_cols(blocks[c], i, i + 1);
          Var pg = kde_grid_var(col, st.bandwidth[i][c], grid);
          Var q = tape.constant(st.grids[i][c]);
          // KL of the joint blocks: prior * sum p ln(p / q)
          Var lp = ops::log(ops::clamp(pg, kKlFloor, 1.0));
          Var lq = ops::log(ops::clamp(q, kKlFloor, 1.0));
          Var kl = ops::sum(pg * (lp - lq)) * st.prior[c];
          total = (t == 0 && i == 0 && c == 0) ? kl : total + kl;
        }
      }
    }
    return total;
  };

  std::vector<Tensor>& pt = params.tensors();
  std::vector<Tensor> best = pt;
  AdamState adam({.learning_rate = config.learning_rate}, pt);
  PrelimGenerator out;
  out.best_loss_ = std::numeric_limits<double>::infinity();
  std::size_t wait = 0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const LossAndGrads lg = evaluate_with_gradients(graph, pt, {});
    out.epochs_ = epoch + 1;
    if (lg.loss < out.best_loss_ - config.tolerance) {
      out.best_loss_ = lg.loss;
      best = pt;
      wait = 0;
    } else if (++wait >= config.patience) {
      break;
    }
    adam.step(pt, lg.grads);
  }

  // roll the full source sequence and decode the next domain
  Tape tape;
  std::vector<Var> pv;
  for (const Tensor& t : best) pv.push_back(tape.constant(t));
  std::vector<Var> hs;
  run_steps(tape, pv, summaries.size(), hs);
  const Tensor rows = decode_rows(net, pv, hs.back(), tape.constant(codes)).value();
  const std::size_t ones = count_ones(n, class_frequencies(stream.last_source()).second);
  std::vector<double> labels(n, 0.0);
  for (std::size_t i = n - ones; i < n; ++i) labels[i] = 1.0;
  out.generated_ = DomainDataset(stream.target.domain_index(), rows, std::move(labels),
                                 Task::kClassification, stream.last_source().feature_names());
  return out;
}

void write_density_csv(std::ostream& out, const DensityGrid& g) {
  out << "grid,mass\n";
  std::ostringstream row;
  row.precision(17);
  for (std::size_t i = 0; i < g.points.size(); ++i) {
    row.str({});
    row << g.points[i] << ',' << g.masses[i] << '\n';
    out << row.str();
  }
}

}  // namespace coda

#include "coda/ops.hpp"

#include <array>
#include <cmath>

namespace coda::ops {
namespace {

enum class Broadcast { kSame, kRow, kScalar };

Broadcast classify(const Tensor& a, const Tensor& b, const char* op) {
  if (same_shape(a, b)) return Broadcast::kSame;
  if (b.size() == 1) return Broadcast::kScalar;
  if (a.rank() == 2 && b.rank() == 2 && b.rows() == 1 && b.cols() == a.cols()) {
    return Broadcast::kRow;
  }
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) +
                   " and " + to_string(b.shape()));
}

inline std::size_t rhs_index(Broadcast kind, std::size_t i, std::size_t cols) {
  switch (kind) {
    case Broadcast::kSame: return i;
    case Broadcast::kRow: return i % cols;
    case Broadcast::kScalar: return 0;
  }
  return 0;
}

// f(x, y) -> value; dfx / dfy (x, y, out) -> partial derivative.
template <class F, class DX, class DY>
Var binary(Var a, Var b, const char* name, F f, DX dfx, DY dfy) {
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast kind = classify(av, bv, name);
  const std::size_t cols = av.rank() == 2 ? av.cols() : av.size();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = f(av[i], bv[rhs_index(kind, i, cols)]);
  }
  const std::size_t ia = a.id(), ib = b.id();
  const std::array inputs{a, b};
  return tape.record(std::move(out), inputs,
                     [=](Tape& t, std::size_t self) {
                       const Tensor& x = t.value(ia);
                       const Tensor& y = t.value(ib);
                       const Tensor& o = t.value(self);
                       const Tensor& g = t.grad(self);
                       if (t.requires_grad(ia)) {
                         Tensor& gx = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < x.size(); ++i) {
                           const std::size_t j = rhs_index(kind, i, cols);
                           gx[i] += g[i] * dfx(x[i], y[j], o[i]);
                         }
                       }
                       if (t.requires_grad(ib)) {
                         Tensor& gy = t.grad_buffer(ib);
                         for (std::size_t i = 0; i < x.size(); ++i) {
                           const std::size_t j = rhs_index(kind, i, cols);
                           gy[j] += g[i] * dfy(x[i], y[j], o[i]);
                         }
                       }
                     });
}

// f(x) -> value; df(x, out) -> derivative.
template <class F, class D>
Var unary(Var a, F f, D df) {
  Tape& tape = *a.tape();
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const std::size_t ia = a.id();
  const std::array inputs{a};
  return tape.record(std::move(out), inputs, [=](Tape& t, std::size_t self) {
    const Tensor& x = t.value(ia);
    const Tensor& o = t.value(self);
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * df(x[i], o[i]);
  });
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + to_string(t.shape()));
  }
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Var div(Var a, Var b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double o) { return -o / y; });
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(av, "matmul");
  require_rank2(bv, "matmul");
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  if (bv.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ, " + to_string(av.shape()) + " x " +
                     to_string(bv.shape()));
  }
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = &out[i * m];
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * m];
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  const std::array inputs{a, b};
  return a.tape()->record(std::move(out), inputs, [=](Tape& t, std::size_t self) {
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(ib);
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) {
      // dX = G * Y^T
      Tensor& gx = t.grad_buffer(ia);
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = &g[i * m];
        for (std::size_t p = 0; p < k; ++p) {
          const double* yrow = &y[p * m];
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * yrow[j];
          gx[i * k + p] += acc;
        }
      }
    }
    if (t.requires_grad(ib)) {
      // dY = X^T * G
      Tensor& gy = t.grad_buffer(ib);
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = &g[i * m];
        for (std::size_t p = 0; p < k; ++p) {
          const double xip = x[i * k + p];
          if (xip == 0.0) continue;
          double* gyrow = &gy[p * m];
          for (std::size_t j = 0; j < m; ++j) gyrow[j] += xip * grow[j];
        }
      }
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_rank2(av, "transpose");
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  const std::size_t ia = a.id();
  const std::array inputs{a};
  return a.tape()->record(std::move(out), inputs, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
  });
}

Var neg(Var a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var scale(Var a, double c) {
  return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double o) { return 1.0 - o * o; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double o) { return o * (1.0 - o); });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double o) { return o; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var sqrt(Var a) {
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double o) { return 0.5 / o; });
}

Var abs(Var a) {
  return unary(a, [](double x) { return std::fabs(x); },
               [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
  return unary(a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
               [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Var sum(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double v : av.values()) s += v;
  const std::size_t ia = a.id();
  const std::array inputs{a};
  return a.tape()->record(Tensor::scalar(s), inputs, [=](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var l2_norm(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double v : av.values()) s += v * v;
  const double norm = std::sqrt(s);
  const std::size_t ia = a.id();
  const std::array inputs{a};
  return a.tape()->record(Tensor::scalar(norm), inputs, [=](Tape& t, std::size_t self) {
    if (norm == 0.0) return;
    const double g = t.grad(self)[0] / norm;
    const Tensor& x = t.value(ia);
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * x[i];
  });
}

Var sum_rows(Var a) {
  const Tensor& av = a.value();
  require_rank2(av, "sum_rows");
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({1, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += av[i * c + j];
  const std::size_t ia = a.id();
  const std::array inputs{a};
  return a.tape()->record(std::move(out), inputs, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j];
  });
}

Var mean_rows(Var a) {
  return scale(sum_rows(a), 1.0 / static_cast<double>(a.value().rows()));
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_rank2(av, "slice_cols");
  const std::size_t r = av.rows(), c = av.cols();
  if (begin >= end || end > c) {
    throw ShapeError("slice_cols: bad range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") for " + std::to_string(c) + " columns");
  }
  const std::size_t w = end - begin;
  Tensor out({r, w});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = av[i * c + begin + j];
  const std::size_t ia = a.id();
  const std::array inputs{a};
  return a.tape()->record(std::move(out), inputs, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) gx[i * c + begin + j] += g[i * w + j];
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_rank2(av, "slice_rows");
  const std::size_t r = av.rows(), c = av.cols();
  if (begin >= end || end > r) {
    throw ShapeError("slice_rows: bad range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") for " + std::to_string(r) + " rows");
  }
  Tensor out({end - begin, c});
  std::copy(av.values().begin() + static_cast<std::ptrdiff_t>(begin * c),
            av.values().begin() + static_cast<std::ptrdiff_t>(end * c), out.values().begin());
  const std::size_t ia = a.id();
  const std::array inputs{a};
  return a.tape()->record(std::move(out), inputs, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * c + i] += g[i];
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts[0].value().rows();
  std::vector<std::size_t> widths, ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank2(p.value(), "concat_cols");
    if (p.value().rows() != r) throw ShapeError("concat_cols: row counts differ");
    widths.push_back(p.value().cols());
    ids.push_back(p.id());
    total += p.value().cols();
  }
  Tensor out({r, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + off + j] = pv[i * widths[k] + j];
    off += widths[k];
  }
  return parts[0].tape()->record(std::move(out), parts, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    std::size_t o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) {
        Tensor& gx = t.grad_buffer(ids[k]);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) gx[i * widths[k] + j] += g[i * total + o + j];
      }
      o += widths[k];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts[0].value().cols();
  std::vector<std::size_t> heights, ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank2(p.value(), "concat_rows");
    if (p.value().cols() != c) throw ShapeError("concat_rows: column counts differ");
    heights.push_back(p.value().rows());
    ids.push_back(p.id());
    total += p.value().rows();
  }
  Tensor out({total, c});
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(off * c));
    off += p.value().rows();
  }
  return parts[0].tape()->record(std::move(out), parts, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    std::size_t o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) {
        Tensor& gx = t.grad_buffer(ids[k]);
        for (std::size_t i = 0; i < heights[k] * c; ++i) gx[i] += g[o * c + i];
      }
      o += heights[k];
    }
  });
}

}  // namespace coda::ops

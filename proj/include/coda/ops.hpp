#pragma once

#include <span>

#include "coda/tape.hpp"

namespace coda::ops {

// Binary elementwise ops accept operands of equal shape, a {1, n} row that is
// broadcast over every row of the left operand, or a single-element right operand.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var matmul(Var a, Var b);
Var transpose(Var a);

Var neg(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);

Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var relu(Var a);
Var sqrt(Var a);
Var abs(Var a);
Var square(Var a);
/// Clamps into [lo, hi]; gradient is zero where the clamp is active.
Var clamp(Var a, double lo, double hi);

/// Sum of all entries, {1, 1}.
Var sum(Var a);
Var mean(Var a);
/// Euclidean norm of all entries, {1, 1}. The gradient at zero is taken as zero.
Var l2_norm(Var a);
/// Column sums of a rank-2 tensor, {1, cols}.
Var sum_rows(Var a);
Var mean_rows(Var a);

/// Columns [begin, end) of a rank-2 tensor.
Var slice_cols(Var a, std::size_t begin, std::size_t end);
/// Rows [begin, end) of a rank-2 tensor.
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);

}  // namespace coda::ops

namespace coda {

inline Var operator+(Var a, Var b) { return ops::add(a, b); }
inline Var operator-(Var a, Var b) { return ops::sub(a, b); }
inline Var operator*(Var a, Var b) { return ops::mul(a, b); }
inline Var operator/(Var a, Var b) { return ops::div(a, b); }
inline Var operator-(Var a) { return ops::neg(a); }
inline Var operator*(Var a, double c) { return ops::scale(a, c); }
inline Var operator*(double c, Var a) { return ops::scale(a, c); }
inline Var operator+(Var a, double c) { return ops::add_scalar(a, c); }
inline Var operator-(Var a, double c) { return ops::add_scalar(a, -c); }
inline Var operator-(double c, Var a) { return ops::add_scalar(ops::neg(a), c); }

}  // namespace coda

#pragma once

#include <cstddef>
#include <vector>

#include "uat/adiff/tape.hpp"

// Differentiable operations on Vars. Every op records its result on the tape
// of its operands; operands must share a tape.
//
// Complex quantities are stored as a trailing dimension of size 2 holding
// (real, imag). The complex_* ops consume and produce that layout.

namespace uat::adiff {

/// Numpy-style broadcast of two shapes; throws ShapeError when incompatible.
Shape broadcast_shapes(const Shape& a, const Shape& b);

// Elementwise binary, broadcasting.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

// Scalar helpers.
Var scale(const Var& a, double factor);
Var shift(const Var& a, double offset);
Var neg(const Var& a);

// Elementwise unary.
Var exp(const Var& a);
Var log2(const Var& a);  ///< throws DomainError on non-positive entries
Var sqrt(const Var& a);  ///< throws DomainError on non-positive entries
Var square(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var softplus(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
/// max(0, x) with subgradient 1 at x == 0.
Var hinge(const Var& a);

// Linear algebra.
/// a: [..., M, K], b: [K, N] or [..., K, N] with a's batch dims.
Var matmul(const Var& a, const Var& b);

// Reductions.
Var sum(const Var& a);
Var sum(const Var& a, std::size_t axis, bool keepdim = false);
Var mean(const Var& a);
Var mean(const Var& a, std::size_t axis, bool keepdim = false);

// Shape manipulation.
Var reshape(const Var& a, Shape shape);
Var broadcast_to(const Var& a, const Shape& shape);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(const Var& a, std::size_t axis, std::size_t begin, std::size_t end);
Var transpose(const Var& a, std::size_t axis0, std::size_t axis1);

// Complex composites on interleaved (re, im) pairs.
Var complex_abs2(const Var& a);                   ///< [..., 2] -> [...]
/// atan2(im, re) in (−π, π]: [..., 2] -> [...]. Throws DomainError at 0.
Var complex_arg(const Var& a);
Var complex_mul(const Var& a, const Var& b);      ///< elementwise, [..., 2]
Var complex_conj(const Var& a);                   ///< [..., 2]
Var complex_exp_i(const Var& phase);              ///< e^{i·phase}: [...] -> [..., 2]
/// a: [..., M, P, 2], b: [P, Q, 2] or [..., P, Q, 2] -> [..., M, Q, 2]
Var complex_matmul(const Var& a, const Var& b);
/// Batched inverse of [..., M, M, 2]; throws DomainError when singular.
Var complex_inverse(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(const Var& a, double c) { return scale(a, c); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator+(const Var& a, double c) { return shift(a, c); }
inline Var operator+(double c, const Var& a) { return shift(a, c); }
inline Var operator-(const Var& a, double c) { return shift(a, -c); }

}  // namespace uat::adiff

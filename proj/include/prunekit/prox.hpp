#ifndef PRUNEKIT_PROX_HPP_
#define PRUNEKIT_PROX_HPP_

#include <cmath>
#include <stdexcept>
#include <vector>

#include "prunekit/matrix.hpp"

namespace prunekit {

enum class Axis { Row, Col };

// Argument bundle for the group soft-thresholding operators: the matrix
// being shrunk and the non-negative threshold (the ratio of the
// regularization weight to the augmented penalty).
struct ProxInput {
  Matrix c;
  double threshold = 0.0;
};

namespace detail {

inline void check_threshold(double threshold) {
  if (!(threshold >= 0.0)) {
    throw std::invalid_argument("group prox: threshold must be >= 0");
  }
}

// Shrinks one contiguous-strided group in place:
// g <- (1 - t/||g||) g if ||g|| > t, else 0. The boundary ||g|| == t
// lands in the zero branch, which the shrink formula also maps to zero;
// zero-norm groups short-circuit so no 0/0 division occurs.
inline void shrink_group(double* base, std::size_t n, std::size_t stride,
                         double threshold) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = base[i * stride];
    acc += v * v;
  }
  const double norm = std::sqrt(acc);
  if (norm <= threshold) {
    for (std::size_t i = 0; i < n; ++i) base[i * stride] = 0.0;
    return;
  }
  const double factor = 1.0 - threshold / norm;
  if (factor == 1.0) return;  // threshold 0: exact identity
  for (std::size_t i = 0; i < n; ++i) base[i * stride] *= factor;
}

}  // namespace detail

//! Row-wise group soft-thresholding: each row p of the result is
//! (1 - t/||c_p||) c_p when ||c_p||_2 exceeds the threshold t, and the
//! zero row otherwise. This is the closed-form minimizer of
//! sum_p ||x_p||_2 + (1/2t) ||x - c||_F^2.
inline Matrix row_group_prox(const Matrix& c, double threshold) {
  detail::check_threshold(threshold);
  Matrix out = c;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    detail::shrink_group(out.row_ptr(r), out.cols(), 1, threshold);
  }
  return out;
}

inline Matrix row_group_prox(const ProxInput& in) {
  return row_group_prox(in.c, in.threshold);
}

//! Column-wise analogue of row_group_prox.
inline Matrix col_group_prox(const Matrix& c, double threshold) {
  detail::check_threshold(threshold);
  Matrix out = c;
  if (out.rows() == 0) return out;
  for (std::size_t q = 0; q < out.cols(); ++q) {
    detail::shrink_group(out.data() + q, out.rows(), out.cols(), threshold);
  }
  return out;
}

inline Matrix col_group_prox(const ProxInput& in) {
  return col_group_prox(in.c, in.threshold);
}

//! Per-layer proximal objective: sum of group norms of x plus
//! (rho / 2 lambda) ||x - c||_F^2, unscaled by lambda.
inline double prox_objective(const Matrix& x, const Matrix& c, double lambda,
                             double rho, Axis axis) {
  x.require_same_shape(c, "prox_objective");
  if (!(lambda > 0.0) || !(rho > 0.0)) {
    throw std::invalid_argument("prox_objective: lambda and rho must be > 0");
  }
  double norms = 0.0;
  const auto groups = (axis == Axis::Row) ? row_l2_norms(x) : col_l2_norms(x);
  for (double n : groups) norms += n;
  const double d = frobenius_distance(x, c);
  return norms + (rho / (2.0 * lambda)) * d * d;
}

namespace detail {

// Golden-section minimizer of phi(s) = s + (s - norm)^2 / (2 t) over
// s in [0, norm], refined to 1e-8. phi is strictly convex, so the
// bracket shrinks to the optimum; no closed-form shortcut is taken.
inline double minimize_group_scale(double norm, double threshold) {
  if (norm == 0.0) return 0.0;
  if (threshold == 0.0) return norm;
  const auto phi = [&](double s) {
    const double d = s - norm;
    return s + d * d / (2.0 * threshold);
  };
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = norm;
  double x1 = hi - invphi * (hi - lo);
  double x2 = lo + invphi * (hi - lo);
  double f1 = phi(x1), f2 = phi(x2);
  while (hi - lo > 1e-8 * std::max(1.0, norm)) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = phi(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = phi(x2);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

//! Brute-force reference for the group prox, intended for verification on
//! small matrices. Exploits only that the minimizer of
//! ||x|| + (1/2t)||x - c||^2 is colinear with c, then solves the
//! remaining 1-D problem numerically by golden-section search.
inline Matrix prox_oracle(const Matrix& c, double threshold, Axis axis) {
  detail::check_threshold(threshold);
  Matrix out = c;
  const bool rowwise = (axis == Axis::Row);
  const std::size_t ngroups = rowwise ? c.rows() : c.cols();
  for (std::size_t g = 0; g < ngroups; ++g) {
    double* base = rowwise ? out.row_ptr(g) : out.data() + g;
    const std::size_t n = rowwise ? out.cols() : out.rows();
    const std::size_t stride = rowwise ? 1 : out.cols();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = base[i * stride];
      acc += v * v;
    }
    const double norm = std::sqrt(acc);
    const double s = detail::minimize_group_scale(norm, threshold);
    if (norm == 0.0) continue;
    const double factor = s / norm;
    for (std::size_t i = 0; i < n; ++i) base[i * stride] *= factor;
  }
  return out;
}

}  // namespace prunekit

#endif  // PRUNEKIT_PROX_HPP_

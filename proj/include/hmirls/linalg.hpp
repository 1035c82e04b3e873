#pragma once

// Dense linear-algebra substrate: full SVD with a pinned sign convention,
// Schatten (quasi-)norms, best rank-r tail sums and the Kronecker-sum
// operator algebra used by every weight operator in the library.
//
// Vectorization follows the column-stacking convention: for X of shape
// d1 x d2, vec(X)[i + j*d1] = X(i, j). Under this convention
// (I_{d2} (x) A) vec(X) = vec(A X) and (B (x) I_{d1}) vec(X) = vec(X B^T).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hmirls/errors.hpp"

namespace hmirls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct SvdFactors {
  Matrix U;      // d1 x d1, orthogonal
  Matrix V;      // d2 x d2, orthogonal
  Vector sigma;  // min(d1, d2), non-increasing
};

/// Column-stacking vectorization.
inline Vector vec(const Matrix& X) {
  return Eigen::Map<const Vector>(X.data(), X.size());
}

/// Inverse of vec for a d1 x d2 shape.
inline Matrix mat(const Vector& x, Index d1, Index d2) {
  if (x.size() != d1 * d2) {
    throw ParameterError("mat: vector length does not match d1*d2");
  }
  return Eigen::Map<const Matrix>(x.data(), d1, d2);
}

inline bool all_finite(const Matrix& X) { return X.allFinite(); }

namespace detail {

// Flip column k of Q (and the paired column of P when present) so that the
// entry of largest magnitude in Q's column is positive. Ties on magnitude are
// resolved towards the lowest row index.
inline void fix_sign(Matrix& Q, Index k, Matrix* P) {
  Index arg = 0;
  double best = -1.0;
  for (Index i = 0; i < Q.rows(); ++i) {
    const double a = std::abs(Q(i, k));
    if (a > best) {
      best = a;
      arg = i;
    }
  }
  if (Q(arg, k) < 0.0) {
    Q.col(k) *= -1.0;
    if (P != nullptr) P->col(k) *= -1.0;
  }
}

}  // namespace detail

/// Full SVD X = U diag(sigma) V^T with square U, V.
///
/// Each left singular vector has its largest-magnitude entry positive; the
/// paired right vector is flipped along with it. Columns of U or V outside the
/// first min(d1, d2) follow the same rule on their own.
inline SvdFactors svd(const Matrix& X) {
  if (X.rows() == 0 || X.cols() == 0) {
    throw ParameterError("svd: empty matrix");
  }
  if (!all_finite(X)) {
    throw ParameterError("svd: non-finite entries");
  }
  SvdFactors out;
  {
    Eigen::BDCSVD<Matrix> dec(X, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out = SvdFactors{dec.matrixU(), dec.matrixV(), dec.singularValues()};
  }
  if (!out.U.allFinite() || !out.V.allFinite() || !out.sigma.allFinite()) {
    // divide-and-conquer occasionally breaks down; one-sided Jacobi does not
    Eigen::JacobiSVD<Matrix> dec(X, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out = SvdFactors{dec.matrixU(), dec.matrixV(), dec.singularValues()};
  }
  if (!out.U.allFinite() || !out.V.allFinite() || !out.sigma.allFinite()) {
    throw NumericalFailure("svd: factorization produced non-finite factors");
  }
  const Index d = out.sigma.size();
  for (Index k = 0; k < d; ++k) detail::fix_sign(out.U, k, &out.V);
  for (Index k = d; k < out.U.cols(); ++k) detail::fix_sign(out.U, k, nullptr);
  for (Index k = d; k < out.V.cols(); ++k) detail::fix_sign(out.V, k, nullptr);
  return out;
}

/// Singular values only, non-increasing.
inline Vector singular_values(const Matrix& X) {
  if (!all_finite(X)) {
    throw ParameterError("singular_values: non-finite entries");
  }
  Eigen::BDCSVD<Matrix> dec(X);
  Vector s = dec.singularValues();
  if (!s.allFinite()) s = Eigen::JacobiSVD<Matrix>(X).singularValues();
  return s;
}

/// (sum sigma_i^p)^(1/p) for finite p > 0, sigma_max for p = +inf.
inline double schatten_norm(const Matrix& X, double p) {
  if (!(p > 0.0)) {
    throw ParameterError("schatten_norm: p must be positive (use rank() for p = 0)");
  }
  const Vector s = singular_values(X);
  if (s.size() == 0) return 0.0;
  if (std::isinf(p)) return s(0);
  if (p == 2.0) return std::sqrt(s.squaredNorm());
  double acc = 0.0;
  for (Index i = 0; i < s.size(); ++i) acc += std::pow(s(i), p);
  return std::pow(acc, 1.0 / p);
}

/// Number of singular values strictly above tol * sigma_1.
inline Index rank(const Matrix& X, double tol = 1e-12) {
  const Vector s = singular_values(X);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Index k = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * s(0)) ++k;
  }
  return k;
}

/// sum_{i > r} sigma_i(X)^p: the best rank-r Schatten-p approximation error.
inline double best_rank_r_error(const Matrix& X, Index r, double p) {
  const Index d = std::min(X.rows(), X.cols());
  if (r < 0 || r > d) {
    throw ParameterError("best_rank_r_error: r out of range [0, min(d1,d2)]");
  }
  if (!(p > 0.0 && p <= 1.0)) {
    throw ParameterError("best_rank_r_error: p must lie in (0, 1]");
  }
  const Vector s = singular_values(X);
  double acc = 0.0;
  for (Index i = r; i < d; ++i) acc += std::pow(s(i), p);
  return acc;
}

/// Entrywise product.
inline Matrix hadamard(const Matrix& A, const Matrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    throw ParameterError("hadamard: shape mismatch");
  }
  return A.cwiseProduct(B);
}

/// Two symmetric PSD operators A = U diag(left) U^T and B = V diag(right) V^T
/// given in their eigenbases. Their Kronecker sum I (x) A + B (x) I is
/// diagonal in the (V (x) U) basis with eigenvalues left_i + right_j.
struct SpectralPair {
  Vector left_spectrum;
  Vector right_spectrum;
  Matrix U;
  Matrix V;
};

/// Z -> A Z + Z B, the Kronecker sum applied in matrix form.
inline Matrix kronsum_apply(const SpectralPair& sp, const Matrix& Z) {
  const Index d1 = sp.U.rows();
  const Index d2 = sp.V.rows();
  if (Z.rows() != d1 || Z.cols() != d2) {
    throw ParameterError("kronsum_apply: shape mismatch");
  }
  Matrix C = sp.U.transpose() * Z * sp.V;
  for (Index j = 0; j < d2; ++j) {
    for (Index i = 0; i < d1; ++i) {
      C(i, j) *= sp.left_spectrum(i) + sp.right_spectrum(j);
    }
  }
  return sp.U * C * sp.V.transpose();
}

/// [(A (+) B)^{-1} vec(Z)]_mat = U (H o (U^T Z V)) V^T, H_ij = 1/(left_i + right_j).
inline Matrix kronsum_inverse_apply(const SpectralPair& sp, const Matrix& Z) {
  const Index d1 = sp.U.rows();
  const Index d2 = sp.V.rows();
  if (sp.left_spectrum.size() != d1 || sp.right_spectrum.size() != d2) {
    throw ParameterError("kronsum_inverse_apply: spectrum lengths do not match U, V");
  }
  if (Z.rows() != d1 || Z.cols() != d2) {
    throw ParameterError("kronsum_inverse_apply: shape mismatch");
  }
  Matrix C = sp.U.transpose() * Z * sp.V;
  for (Index j = 0; j < d2; ++j) {
    for (Index i = 0; i < d1; ++i) {
      const double den = sp.left_spectrum(i) + sp.right_spectrum(j);
      if (!(den > 0.0)) {
        std::ostringstream msg;
        msg << "kronsum_inverse_apply: zero denominator at (" << i << ", " << j << ")";
        throw SingularityError(msg.str());
      }
      C(i, j) /= den;
    }
  }
  return sp.U * C * sp.V.transpose();
}

}  // namespace hmirls

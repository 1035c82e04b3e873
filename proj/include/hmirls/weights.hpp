#pragma once

// Weight operators of the four IRLS reweighting laws.
//
// Every weight operator W is diagonal in the orthonormal basis
// {u_i v_j^T} built from the singular vectors of the current iterate:
//
//   <vec X, W vec X> = sum_ij H_ij <u_i, X v_j>^2,
//   W^{-1}(X)        = U (Hbar o (U^T X V)) V^T,   Hbar = 1 / H.
//
// With smoothed singular values sbar_i = (sigma_i^2 + eps^2)^{1/2} for
// i < d = min(d1, d2), the coefficient laws are
//
//   HM   H_ij = 2 / (a_i + b_j)            a, b = sbar^{2-p}, zero-padded
//   COL  H_ij = sbar_i^{p-2}               padded rows use eps^{p-2}
//   ROW  H_ij = sbar_j^{p-2}               padded cols use eps^{p-2}
//   AM   H_ij = (sbar_i^{p-2} + sbar_j^{p-2}) / 2
//
// HM is the harmonic mean of the COL and ROW coefficients, AM their
// arithmetic mean. HM, COL and ROW inverses split into one- or two-sided
// matrix products W^{-1}(X) = L X + X R; AM's does not.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "hmirls/errors.hpp"
#include "hmirls/linalg.hpp"

namespace hmirls {

enum class Variant { HM, AM, COL, ROW };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::HM: return "HM";
    case Variant::AM: return "AM";
    case Variant::COL: return "COL";
    case Variant::ROW: return "ROW";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "HM" || s == "hm") return Variant::HM;
  if (s == "AM" || s == "am") return Variant::AM;
  if (s == "COL" || s == "col") return Variant::COL;
  if (s == "ROW" || s == "row") return Variant::ROW;
  throw ParameterError("unknown variant '" + std::string(s) + "' (expected HM, AM, COL or ROW)");
}

/// W^{-1}(X) = left * X + X * right.
struct TwoSidedInverse {
  Matrix left;
  Matrix right;
};

struct WeightState {
  Variant variant = Variant::HM;
  double p = 1.0;
  double epsilon = 1.0;
  bool identity = false;
  Matrix U;
  Matrix V;
  Vector smoothed;  // sbar_i, length min(d1, d2); empty for the identity state
  Matrix H;         // d1 x d2 coefficients, all finite and positive
  Matrix Hinv;      // entrywise 1 / H
  std::optional<TwoSidedInverse> two_sided;

  Index d1() const noexcept { return U.rows(); }
  Index d2() const noexcept { return V.rows(); }
};

/// W = I. Used as the starting weight of every solve.
inline WeightState identity_weight_state(Index d1, Index d2, double p, Variant variant, double epsilon = 1.0) {
  WeightState w;
  w.variant = variant;
  w.p = p;
  w.epsilon = epsilon;
  w.identity = true;
  w.U = Matrix::Identity(d1, d1);
  w.V = Matrix::Identity(d2, d2);
  w.H = Matrix::Ones(d1, d2);
  w.Hinv = Matrix::Ones(d1, d2);
  w.two_sided = TwoSidedInverse{Matrix::Identity(d1, d1), Matrix::Zero(d2, d2)};
  return w;
}

namespace detail {

inline void require_positive_finite(double v, Index i, Index j, const char* who) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream msg;
    msg << who << ": degenerate weight coefficient at (" << i << ", " << j
        << "); eps = 0 with a rank-deficient iterate";
    throw SingularityError(msg.str());
  }
}

}  // namespace detail

/// Weight state of `variant` from a precomputed SVD of the iterate.
inline WeightState build_weight_state(const SvdFactors& f, double epsilon, double p, Variant variant) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ParameterError("build_weight_state: eps must be >= 0");
  if (!(p > 0.0 && p <= 1.0)) throw ParameterError("build_weight_state: p must lie in (0, 1]");
  const Index d1 = f.U.rows(), d2 = f.V.rows();
  const Index d = f.sigma.size();

  WeightState w;
  w.variant = variant;
  w.p = p;
  w.epsilon = epsilon;
  w.U = f.U;
  w.V = f.V;
  w.smoothed.resize(d);
  for (Index i = 0; i < d; ++i) w.smoothed(i) = std::hypot(f.sigma(i), epsilon);

  // one-sided inverse coefficients: sbar^{2-p}, with eps^{2-p} (COL/ROW/AM)
  // or 0 (HM) past index d
  const double q = 2.0 - p;
  const double pad_one_sided = std::pow(epsilon, q);
  auto side = [&](Index n, bool zero_pad) {
    Vector s(n);
    for (Index i = 0; i < n; ++i) s(i) = i < d ? std::pow(w.smoothed(i), q) : (zero_pad ? 0.0 : pad_one_sided);
    return s;
  };

  w.H.resize(d1, d2);
  w.Hinv.resize(d1, d2);
  switch (variant) {
    case Variant::HM: {
      const Vector a = side(d1, true), b = side(d2, true);
      for (Index j = 0; j < d2; ++j)
        for (Index i = 0; i < d1; ++i) {
          const double s = a(i) + b(j);
          detail::require_positive_finite(s, i, j, "build_weight_state");
          w.Hinv(i, j) = 0.5 * s;
          w.H(i, j) = 2.0 / s;
        }
      w.two_sided = TwoSidedInverse{w.U * (0.5 * a).asDiagonal() * w.U.transpose(),
                                    w.V * (0.5 * b).asDiagonal() * w.V.transpose()};
      break;
    }
    case Variant::COL: {
      const Vector a = side(d1, false);
      for (Index j = 0; j < d2; ++j)
        for (Index i = 0; i < d1; ++i) {
          detail::require_positive_finite(a(i), i, j, "build_weight_state");
          w.Hinv(i, j) = a(i);
          w.H(i, j) = 1.0 / a(i);
        }
      w.two_sided = TwoSidedInverse{w.U * a.asDiagonal() * w.U.transpose(), Matrix::Zero(d2, d2)};
      break;
    }
    case Variant::ROW: {
      const Vector b = side(d2, false);
      for (Index j = 0; j < d2; ++j)
        for (Index i = 0; i < d1; ++i) {
          detail::require_positive_finite(b(j), i, j, "build_weight_state");
          w.Hinv(i, j) = b(j);
          w.H(i, j) = 1.0 / b(j);
        }
      w.two_sided = TwoSidedInverse{Matrix::Zero(d1, d1), w.V * b.asDiagonal() * w.V.transpose()};
      break;
    }
    case Variant::AM: {
      const Vector a = side(d1, false), b = side(d2, false);
      for (Index j = 0; j < d2; ++j)
        for (Index i = 0; i < d1; ++i) {
          detail::require_positive_finite(a(i), i, j, "build_weight_state");
          detail::require_positive_finite(b(j), i, j, "build_weight_state");
          const double h = 0.5 * (1.0 / a(i) + 1.0 / b(j));
          w.H(i, j) = h;
          w.Hinv(i, j) = 2.0 * a(i) * b(j) / (a(i) + b(j));
        }
      break;
    }
  }
  if (!w.H.allFinite()) throw SingularityError("build_weight_state: non-finite coefficient");
  return w;
}

/// Weight state of `variant` at iterate X with smoothing eps.
inline WeightState build_weight_state(const Matrix& X, double epsilon, double p, Variant variant) {
  return build_weight_state(svd(X), epsilon, p, variant);
}

inline void check_shape(const WeightState& w, const Matrix& X, const char* who) {
  if (X.rows() != w.d1() || X.cols() != w.d2()) {
    throw ParameterError(std::string(who) + ": shape does not match weight state");
  }
}

/// U^T X V, the coordinates of X in the weight basis.
inline Matrix weight_coordinates(const WeightState& w, const Matrix& X) {
  return w.U.transpose() * X * w.V;
}

/// W^{-1}(X) = U (Hbar o (U^T X V)) V^T.
inline Matrix weight_inverse_apply(const WeightState& w, const Matrix& X) {
  check_shape(w, X, "weight_inverse_apply");
  return w.U * w.Hinv.cwiseProduct(weight_coordinates(w, X)) * w.V.transpose();
}

/// W(X) = U (H o (U^T X V)) V^T.
inline Matrix weight_apply(const WeightState& w, const Matrix& X) {
  check_shape(w, X, "weight_apply");
  return w.U * w.H.cwiseProduct(weight_coordinates(w, X)) * w.V.transpose();
}

}  // namespace hmirls

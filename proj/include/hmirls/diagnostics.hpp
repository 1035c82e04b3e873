#pragma once

// Executable forms of the functionals and conditions behind the IRLS
// analysis: the smoothed objective g, the auxiliary functional J and its
// minimizer in Z, stationarity of weighted least-squares solutions,
// null-space-property witnesses, the local contraction constant, and an
// empirical convergence-order estimator.

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hmirls/errors.hpp"
#include "hmirls/linalg.hpp"
#include "hmirls/measurements.hpp"
#include "hmirls/weights.hpp"

namespace hmirls {

/// g(X) = sum_{i <= d} (sigma_i(X)^2 + eps^2)^{p/2}.
inline double g_eps_p(const Vector& sigma, double eps, double p) {
  double acc = 0.0;
  for (Index i = 0; i < sigma.size(); ++i) acc += std::pow(std::hypot(sigma(i), eps), p);
  return acc;
}

inline double g_eps_p(const Matrix& X, double eps, double p) {
  if (!(eps >= 0.0)) throw ParameterError("g_eps_p: eps must be >= 0");
  if (!(p > 0.0 && p <= 1.0)) throw ParameterError("g_eps_p: p must lie in (0, 1]");
  return g_eps_p(singular_values(X), eps, p);
}

/// Minimizer of J(X, eps, .): sum_i (sigma_i^2 + eps^2)^{(p-2)/2} u_i v_i^T.
inline Matrix z_opt(const Matrix& X, double eps, double p) {
  if (!(eps >= 0.0)) throw ParameterError("z_opt: eps must be >= 0");
  const SvdFactors f = svd(X);
  const Index d = f.sigma.size();
  Vector s(d);
  for (Index i = 0; i < d; ++i) {
    const double sbar = std::hypot(f.sigma(i), eps);
    if (!(sbar > 0.0)) throw SingularityError("z_opt: eps = 0 with a rank-deficient X");
    s(i) = std::pow(sbar, p - 2.0);
  }
  return f.U.leftCols(d) * s.asDiagonal() * f.V.leftCols(d).transpose();
}

/// Auxiliary functional
///   J(X, eps, Z) = p/2 ||vec X||^2_{W(Z)} + eps^2 p/2 sum sigma_i(Z)
///                  + (2-p)/2 sum sigma_i(Z)^{p/(p-2)},
/// +inf when Z is numerically rank deficient (sigma_d <= 1e-12 sigma_1).
/// W(Z) is the harmonic-mean weight of Z's spectrum: in Z's singular basis its
/// coefficients are 2 / (1/s_i + 1/s_j), with 1/s taken as 0 on padded indices.
inline double j_p(const Matrix& X, double eps, const Matrix& Z, double p) {
  if (X.rows() != Z.rows() || X.cols() != Z.cols()) throw ParameterError("j_p: shape mismatch");
  const SvdFactors f = svd(Z);
  const Vector& s = f.sigma;
  const Index d = s.size();
  if (!(s(0) > 0.0) || s(d - 1) <= 1e-12 * s(0)) return std::numeric_limits<double>::infinity();

  const Index d1 = X.rows(), d2 = X.cols();
  auto inv_side = [&](Index n) {
    Vector a = Vector::Zero(n);
    for (Index i = 0; i < d; ++i) a(i) = 1.0 / s(i);
    return a;
  };
  const Vector a = inv_side(d1), b = inv_side(d2);
  const Matrix C = f.U.transpose() * X * f.V;
  double quad = 0.0;
  for (Index j = 0; j < d2; ++j)
    for (Index i = 0; i < d1; ++i) quad += 2.0 / (a(i) + b(j)) * C(i, j) * C(i, j);

  double lin = 0.0, pw = 0.0;
  for (Index i = 0; i < d; ++i) {
    lin += s(i);
    pw += std::pow(s(i), p / (p - 2.0));
  }
  return 0.5 * p * quad + 0.5 * eps * eps * p * lin + 0.5 * (2.0 - p) * pw;
}

/// sum_ij H_ij <u_i, X v_j>^2.
inline double weighted_quadratic_form(const WeightState& w, const Matrix& X) {
  check_shape(w, X, "weighted_quadratic_form");
  const Matrix C = weight_coordinates(w, X);
  return w.H.cwiseProduct(C.cwiseProduct(C)).sum();
}

/// Norm of the orthogonal projection onto ker(Phi), computed once per operator.
class NullSpaceProjector {
 public:
  explicit NullSpaceProjector(const MeasurementOperator& op, Index cap = kNullSpaceCap)
      : d1_(op.d1()), d2_(op.d2()) {
    if (op.is_completion()) {
      mask_ = Matrix::Ones(d1_, d2_);
      for (const auto& e : op.entries()) mask_(e.row, e.col) = 0.0;
    } else {
      const auto basis = null_space_basis(op, cap);
      basis_.resize(d1_ * d2_, static_cast<Index>(basis.size()));
      for (std::size_t k = 0; k < basis.size(); ++k) basis_.col(static_cast<Index>(k)) = vec(basis[k]);
      dense_ = true;
    }
  }

  double projected_norm(const Matrix& R) const {
    if (!dense_) return mask_.cwiseProduct(R).norm();
    if (basis_.cols() == 0) return 0.0;
    return (basis_.transpose() * vec(R)).norm();
  }

 private:
  Index d1_, d2_;
  bool dense_ = false;
  Matrix mask_;
  Matrix basis_;
};

/// ||P_N(W X)|| / ||W X|| with W X = U (H o (U^T X V)) V^T. Zero at critical
/// points of the weighted least-squares problem on {Phi(X) = y}.
inline double stationarity_residual(const NullSpaceProjector& proj, const WeightState& w, const Matrix& X) {
  const Matrix R = weight_apply(w, X);
  const double total = R.norm();
  if (total == 0.0) return 0.0;
  return proj.projected_norm(R) / total;
}

inline double stationarity_residual(const MeasurementOperator& op, const WeightState& w, const Matrix& X) {
  return stationarity_residual(NullSpaceProjector(op), w, X);
}

/// Size of the residual that rounding X to working precision alone can cause:
/// u * max(H) * ||X|| / ||W X||. Once eps is tiny, max(H) ~ eps^{p-2} and
/// this floor, not the solve, bounds how stationary a stored iterate can be.
inline double stationarity_rounding_floor(const WeightState& w, const Matrix& X) {
  const double total = weight_apply(w, X).norm();
  if (total == 0.0) return 0.0;
  return std::numeric_limits<double>::epsilon() * w.H.maxCoeff() * X.norm() / total;
}

/// Both sides of the strong and weak Schatten-p null space inequalities for
/// one null-space witness X.
struct NspReport {
  double strong_lhs = 0.0;  // (sum_{i<=r} sigma_i^2)^{p/2}
  double strong_rhs = 0.0;  // gamma_r / r^{1-p/2} * sum_{i>r} sigma_i^p
  double weak_lhs = 0.0;    // sum_{i<=r} sigma_i^p
  double weak_rhs = 0.0;    // sum_{i>r} sigma_i^p
  bool satisfied_strong = false;
  bool satisfied_weak = false;
  std::string note;
};

inline NspReport nsp_witness_check(const Matrix& X, Index r, double p, double gamma_r) {
  const Index d = std::min(X.rows(), X.cols());
  if (r < 1 || r >= d) throw ParameterError("nsp_witness_check: r must lie in [1, min(d1,d2))");
  if (!(p > 0.0 && p <= 1.0)) throw ParameterError("nsp_witness_check: p must lie in (0, 1]");
  if (!(gamma_r > 0.0)) throw ParameterError("nsp_witness_check: gamma_r must be positive");
  const Vector s = singular_values(X);
  if (!(s(0) > 0.0)) throw ParameterError("nsp_witness_check: witness must be nonzero");
  NspReport rep;
  double head_sq = 0.0, head_p = 0.0, tail_p = 0.0;
  for (Index i = 0; i < r; ++i) {
    head_sq += s(i) * s(i);
    head_p += std::pow(s(i), p);
  }
  for (Index i = r; i < d; ++i) tail_p += std::pow(s(i), p);
  rep.strong_lhs = std::pow(head_sq, 0.5 * p);
  rep.strong_rhs = gamma_r / std::pow(static_cast<double>(r), 1.0 - 0.5 * p) * tail_p;
  rep.weak_lhs = head_p;
  rep.weak_rhs = tail_p;
  rep.satisfied_strong = rep.strong_lhs < rep.strong_rhs;
  rep.satisfied_weak = rep.weak_lhs < rep.weak_rhs;
  rep.note =
      "single-witness check: a violated inequality disproves the null space property; "
      "satisfied inequalities on finitely many witnesses never certify it";
  return rep;
}

/// Contraction constant mu of the local superlinear rate
/// ||eta_{n+1}|| <= mu^{1/p} ||eta_n||^{2-p}.
inline double local_rate_constant(double gamma_2r, Index d, Index r, double p, double sigma_r, double zeta,
                                  double kappa) {
  if (!(gamma_2r > 0.0 && gamma_2r < 1.0)) throw ParameterError("local_rate_constant: gamma_2r must lie in (0, 1)");
  if (!(zeta > 0.0 && zeta < 1.0)) throw ParameterError("local_rate_constant: zeta must lie in (0, 1)");
  if (!(kappa >= 1.0)) throw ParameterError("local_rate_constant: kappa must be >= 1");
  if (!(p > 0.0 && p <= 1.0)) throw ParameterError("local_rate_constant: p must lie in (0, 1]");
  if (r < 1 || 2 * r > d) throw ParameterError("local_rate_constant: need 1 <= r <= d/2");
  if (!(sigma_r > 0.0)) throw ParameterError("local_rate_constant: sigma_r must be positive");
  const double g = gamma_2r;
  const double rd = static_cast<double>(r);
  const double dd = static_cast<double>(d);
  return std::pow(2.0, 5.0 * p) * std::pow(1.0 + g, p) *
         std::pow(g * (3.0 + g) * (1.0 + g) / (1.0 - g), 2.0 - p) * std::pow((dd - rd) / rd, 2.0 - 0.5 * p) *
         std::pow(rd, p) * std::pow(sigma_r, p * (p - 1.0)) / std::pow(1.0 - zeta, 2.0 * p) * std::pow(kappa, p);
}

/// mu * ||eta||_{S_inf}^{p(1-p)} < 1, the neighbourhood condition of the local rate.
inline bool local_rate_condition(double mu, double eta_spectral_norm, double p) {
  return mu * std::pow(eta_spectral_norm, p * (1.0 - p)) < 1.0;
}

struct OrderFit {
  double order = 0.0;          // slope q in log e_{n+1} = q log e_n + c
  double prefactor_log = 0.0;  // intercept c
  int points_used = 0;         // distinct error values entering the fit
  std::pair<double, double> window{1e-11, 1e-2};
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Least-squares slope of log e_{n+1} against log e_n over consecutive pairs
/// with both values strictly inside the window. Needs at least two such pairs
/// spanning at least three error values.
inline OrderFit fit_convergence_order(std::span<const double> errors, std::pair<double, double> window = {1e-11, 1e-2}) {
  const auto [lo, hi] = window;
  auto inside = [&](double e) { return std::isfinite(e) && e > lo && e < hi; };
  std::vector<std::pair<double, double>> pts;
  std::vector<char> used(errors.size(), 0);
  for (std::size_t n = 0; n + 1 < errors.size(); ++n) {
    if (inside(errors[n]) && inside(errors[n + 1])) {
      pts.emplace_back(std::log(errors[n]), std::log(errors[n + 1]));
      used[n] = used[n + 1] = 1;
    }
  }
  int values = 0;
  for (char u : used) values += u;
  if (pts.size() < 2 || values < 3) {
    throw InsufficientData("fit_convergence_order: fewer than 3 error values inside the window");
  }
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0)) throw InsufficientData("fit_convergence_order: degenerate error sequence");
  OrderFit fit;
  fit.order = sxy / sxx;
  fit.prefactor_log = my - fit.order * mx;
  fit.points_used = values;
  fit.window = window;
  return fit;
}

/// sigma_1 / sigma_r.
inline double condition_number(const Matrix& X, Index r) {
  const Vector s = singular_values(X);
  if (r < 1 || r > s.size()) throw ParameterError("condition_number: r out of range");
  if (!(s(r - 1) > 0.0)) throw SingularityError("condition_number: sigma_r = 0");
  return s(0) / s(r - 1);
}

}  // namespace hmirls

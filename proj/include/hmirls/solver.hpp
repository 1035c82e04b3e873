#pragma once

// Iteratively reweighted least squares for low-rank matrix recovery.
//
// One loop drives all four reweighting laws (see weights.hpp):
//
//   X_{n+1}   = argmin_{Phi(X) = y} <vec X, W_n vec X>
//             = W_n^{-1} Phi^* (Phi W_n^{-1} Phi^*)^{-1} y
//   eps_{n+1} = max(floor, min(eps_n, sigma_{r+1}(X_{n+1})))
//   W_{n+1}   = weight state of X_{n+1} at eps_{n+1}
//
// starting from W_0 = I and eps_0 = 1.

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hmirls/diagnostics.hpp"
#include "hmirls/errors.hpp"
#include "hmirls/linalg.hpp"
#include "hmirls/measurements.hpp"
#include "hmirls/weights.hpp"

namespace hmirls {

enum class GramBackend { automatic, dense_cholesky, conjugate_gradient };

inline constexpr Index kDenseGramLimit = 2000;

struct SolverConfig {
  double p = 1.0;
  Index rank_estimate = 1;
  Variant variant = Variant::HM;
  double tol_rel_change = 1e-10;
  int max_iters = 3000;
  double success_tol = 1e-3;
  double epsilon_floor = 0.0;
  GramBackend gram_backend = GramBackend::automatic;
  double cg_tol = 1e-12;
  int cg_max_iters = 10000;
  // a step whose relative residual ||Phi(X) - y|| / ||y|| exceeds this is a
  // numerical failure
  double feasibility_guard = 1e-9;
  // X_1 is still the first weighted least-squares solution; a supplied
  // initial iterate only replaces W_0 = I by its own weight state at eps_0.
  std::optional<Matrix> initial_iterate;
  bool record_stationarity = true;

  void validate() const {
    if (!(p > 0.0 && p <= 1.0)) throw ParameterError("solver config: p must lie in (0, 1]");
    if (rank_estimate < 1) throw ParameterError("solver config: rank estimate must be >= 1");
    if (!(tol_rel_change > 0.0)) throw ParameterError("solver config: tol_rel_change must be positive");
    if (max_iters < 1) throw ParameterError("solver config: max_iters must be >= 1");
    if (!(success_tol > 0.0)) throw ParameterError("solver config: success_tol must be positive");
    if (!(epsilon_floor >= 0.0)) throw ParameterError("solver config: epsilon_floor must be >= 0");
    if (!(cg_tol > 0.0) || cg_max_iters < 1) throw ParameterError("solver config: invalid CG settings");
  }
};

enum class SolveStatus { converged, max_iters, numerical_failure };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iters: return "max_iters";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "?";
}

struct IterationRecord {
  int n = 0;
  double rel_change = std::numeric_limits<double>::quiet_NaN();  // NaN at n = 1
  std::optional<double> rel_error;
  double epsilon = 0.0;  // eps_n, computed from X_n
  Vector sigma;
  double g_eps_p = 0.0;  // g_{eps_n}(X_n)
  double feasibility = 0.0;
  double stationarity = std::numeric_limits<double>::quiet_NaN();  // X_n against W_{n-1}
  double stationarity_floor = std::numeric_limits<double>::quiet_NaN();
};

struct SolveTrace {
  std::vector<IterationRecord> records;
  SolveStatus status = SolveStatus::max_iters;
  std::string message;
  double seconds = 0.0;

  int iterations() const { return static_cast<int>(records.size()); }
};

struct SolveResult {
  Matrix X;
  SolveTrace trace;
};

inline GramBackend resolve_backend(GramBackend b, Index m) {
  if (b != GramBackend::automatic) return b;
  return m <= kDenseGramLimit ? GramBackend::dense_cholesky : GramBackend::conjugate_gradient;
}

namespace detail {

// Rows k of the returned matrix hold vec(U^T S_k V) scaled entrywise by
// sqrt(Hbar), so that G = M M^T.
inline Matrix scaled_basis_rows(const MeasurementOperator& op, const WeightState& w) {
  const Index d1 = op.d1(), d2 = op.d2(), m = op.m();
  const Matrix root = w.Hinv.cwiseSqrt();
  Matrix M(m, d1 * d2);
  if (op.is_completion()) {
    const auto& e = op.entries();
    for (Index k = 0; k < m; ++k) {
      const auto& ek = e[static_cast<std::size_t>(k)];
      const Matrix C = (w.U.row(ek.row).transpose() * w.V.row(ek.col)).cwiseProduct(root);
      M.row(k) = vec(C).transpose();
    }
  } else {
    for (Index k = 0; k < m; ++k) {
      const Matrix Sk = mat(op.sensing().row(k).transpose(), d1, d2);
      M.row(k) = vec((w.U.transpose() * Sk * w.V).cwiseProduct(root)).transpose();
    }
  }
  return M;
}

}  // namespace detail

/// G = Phi o W^{-1} o Phi^*, symmetric positive definite m x m.
///
/// Completion with a split inverse W^{-1}(X) = L X + X R (HM, COL, ROW, and
/// the identity) is assembled entry by entry from
///   G_kl = L(i_k, i_l) [j_k = j_l] + R(j_k, j_l) [i_k = i_l],
/// touching only pairs that share a row or a column. Every other case goes
/// through G = M M^T with M from the weight basis.
inline Matrix assemble_gram(const MeasurementOperator& op, const WeightState& w) {
  if (op.d1() != w.d1() || op.d2() != w.d2()) throw ParameterError("assemble_gram: operator/weight shape mismatch");
  const Index m = op.m();
  if (op.is_completion() && w.two_sided) {
    const auto& e = op.entries();
    const Matrix& L = w.two_sided->left;
    const Matrix& R = w.two_sided->right;
    std::vector<std::vector<Index>> by_row(static_cast<std::size_t>(op.d1())), by_col(static_cast<std::size_t>(op.d2()));
    for (Index k = 0; k < m; ++k) {
      by_row[static_cast<std::size_t>(e[static_cast<std::size_t>(k)].row)].push_back(k);
      by_col[static_cast<std::size_t>(e[static_cast<std::size_t>(k)].col)].push_back(k);
    }
    Matrix G = Matrix::Zero(m, m);
    for (const auto& ks : by_col)
      for (Index k : ks)
        for (Index l : ks) G(k, l) += L(e[static_cast<std::size_t>(k)].row, e[static_cast<std::size_t>(l)].row);
    for (const auto& ks : by_row)
      for (Index k : ks)
        for (Index l : ks) G(k, l) += R(e[static_cast<std::size_t>(k)].col, e[static_cast<std::size_t>(l)].col);
    return G;
  }
  const Matrix M = detail::scaled_basis_rows(op, w);
  Matrix G = Matrix::Zero(m, m);
  G.selfadjointView<Eigen::Lower>().rankUpdate(M);
  G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
  return G;
}

/// The same Gram matrix assembled column by column from W^{-1}(Phi^* e_l).
inline Matrix assemble_gram_generic(const MeasurementOperator& op, const WeightState& w) {
  const Index m = op.m();
  Matrix G(m, m);
  for (Index l = 0; l < m; ++l) {
    G.col(l) = apply(op, weight_inverse_apply(w, adjoint_apply(op, Vector::Unit(m, l))));
  }
  return G;
}

namespace detail {

inline Matrix inverse_weight_split_or_generic(const WeightState& w, const Matrix& B) {
  if (w.two_sided) return w.two_sided->left * B + B * w.two_sided->right;
  return weight_inverse_apply(w, B);
}

inline Vector conjugate_gradient(const MeasurementOperator& op, const WeightState& w, const Vector& y, double tol,
                                 int max_iters) {
  auto G = [&](const Vector& v) { return apply(op, inverse_weight_split_or_generic(w, adjoint_apply(op, v))); };
  Vector z = Vector::Zero(y.size());
  Vector r = y;
  Vector d = r;
  double rr = r.squaredNorm();
  const double stop = tol * y.norm();
  for (int it = 0; it < max_iters; ++it) {
    if (std::sqrt(rr) <= stop) return z;
    const Vector Gd = G(d);
    const double dGd = d.dot(Gd);
    if (!(dGd > 0.0)) throw NumericalFailure("conjugate gradient: Gram operator not positive definite");
    const double alpha = rr / dGd;
    z += alpha * d;
    r -= alpha * Gd;
    const double rr_new = r.squaredNorm();
    d = r + (rr_new / rr) * d;
    rr = rr_new;
  }
  if (std::sqrt(rr) <= stop) return z;
  throw NumericalFailure("conjugate gradient: no convergence within cg_max_iters");
}

}  // namespace detail

namespace detail {

inline void check_feasible(const MeasurementOperator& op, const Vector& y, const Matrix& X, double guard,
                           double epsilon) {
  const double infeasibility = (apply(op, X) - y).norm() / std::max(y.norm(), std::numeric_limits<double>::min());
  if (!(infeasibility <= guard)) {
    throw NumericalFailure("weighted_ls_step: Gram solve lost feasibility (relative residual " +
                           std::to_string(infeasibility) + ", eps = " + std::to_string(epsilon) + ")");
  }
}

// Minimum-norm solution of M xi = y with M from scaled_basis_rows; the
// iterate is U (sqrt(Hbar) o mat(xi)) V^T.
inline Matrix min_norm_step(const MeasurementOperator& op, const Vector& y, const WeightState& w, double guard) {
  const Matrix M = scaled_basis_rows(op, w);
  Eigen::HouseholderQR<Matrix> qr(M.transpose());
  const Index m = M.rows();
  const Matrix R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  Vector t = R.transpose().triangularView<Eigen::Lower>().solve(y);
  Vector xi = Vector::Zero(M.cols());
  xi.head(m) = t;
  xi = qr.householderQ() * xi;
  if (!xi.allFinite()) throw NumericalFailure("weighted_ls_step: non-finite minimum-norm solution");
  const Matrix C = mat(xi, op.d1(), op.d2()).cwiseProduct(w.Hinv.cwiseSqrt());
  Matrix X = w.U * C * w.V.transpose();
  check_feasible(op, y, X, guard, w.epsilon);
  return X;
}

}  // namespace detail

namespace detail {

// One-sided inverses on completion: with W^{-1}(X) = L X the Gram matrix is
// block diagonal over columns (blocks L restricted to the sampled rows), and
// with W^{-1}(X) = X R over rows. Returns the Gram solution, or nothing when
// the split is two-sided or a block is numerically singular.
inline std::optional<Vector> block_gram_solve(const MeasurementOperator& op, const WeightState& w, const Vector& y) {
  if (!op.is_completion() || !w.two_sided) return std::nullopt;
  const bool by_col = (w.two_sided->right.array() == 0.0).all();
  const bool by_row = !by_col && (w.two_sided->left.array() == 0.0).all();
  if (!by_col && !by_row) return std::nullopt;
  const Matrix& A = by_col ? w.two_sided->left : w.two_sided->right;
  const auto& e = op.entries();
  std::vector<std::vector<Index>> groups(static_cast<std::size_t>(by_col ? op.d2() : op.d1()));
  for (Index k = 0; k < op.m(); ++k) {
    const auto& ek = e[static_cast<std::size_t>(k)];
    groups[static_cast<std::size_t>(by_col ? ek.col : ek.row)].push_back(k);
  }
  auto coord = [&](Index k) {
    const auto& ek = e[static_cast<std::size_t>(k)];
    return by_col ? ek.row : ek.col;
  };
  Vector z(op.m());
  for (const auto& ks : groups) {
    const Index n = static_cast<Index>(ks.size());
    if (n == 0) continue;
    Matrix B(n, n);
    Vector rhs(n);
    for (Index a = 0; a < n; ++a) {
      rhs(a) = y(ks[static_cast<std::size_t>(a)]);
      for (Index b = 0; b < n; ++b) B(a, b) = A(coord(ks[static_cast<std::size_t>(a)]), coord(ks[static_cast<std::size_t>(b)]));
    }
    Eigen::LLT<Matrix> llt(B);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const Vector t = llt.solve(rhs);
    for (Index a = 0; a < n; ++a) z(ks[static_cast<std::size_t>(a)]) = t(a);
  }
  return z;
}

}  // namespace detail

/// X = W^{-1} Phi^* G^{-1} y, the minimizer of the weighted norm over {Phi(X) = y}.
inline Matrix weighted_ls_step(const MeasurementOperator& op, const Vector& y, const WeightState& w,
                               const SolverConfig& cfg) {
  if (y.size() != op.m()) throw ParameterError("weighted_ls_step: y length does not match m");
  if (op.d1() != w.d1() || op.d2() != w.d2()) throw ParameterError("weighted_ls_step: operator/weight shape mismatch");
  if (op.m() == 0) throw ParameterError("weighted_ls_step: no measurements");
  Vector z;
  const GramBackend backend = resolve_backend(cfg.gram_backend, op.m());
  std::optional<Vector> blocks;
  if (backend == GramBackend::dense_cholesky) blocks = detail::block_gram_solve(op, w, y);
  if (blocks) {
    z = std::move(*blocks);
    if (!z.allFinite()) throw NumericalFailure("weighted_ls_step: non-finite Gram solution");
  } else if (backend == GramBackend::dense_cholesky) {
    const Matrix G = assemble_gram(op, w);
    Eigen::LLT<Matrix> llt(G);
    if (llt.info() == Eigen::Success) {
      z = llt.solve(y);
    } else {
      // Once eps is tiny the Gram matrix is numerically singular. Its square
      // root M (G = M M^T) has half the condition number: solve for the
      // minimum-norm weight coordinates from a QR factorization of M^T.
      return detail::min_norm_step(op, y, w, cfg.feasibility_guard);
    }
    if (!z.allFinite()) throw NumericalFailure("weighted_ls_step: non-finite Gram solution");
  } else {
    z = detail::conjugate_gradient(op, w, y, cfg.cg_tol, cfg.cg_max_iters);
  }
  // Coordinate form, not the explicit split matrices: those round the small
  // eigenvalues of W^{-1}, and W then magnifies that error in W X.
  Matrix X = weight_inverse_apply(w, adjoint_apply(op, z));
  if (!X.allFinite()) throw NumericalFailure("weighted_ls_step: non-finite iterate");
  detail::check_feasible(op, y, X, cfg.feasibility_guard, w.epsilon);
  return X;
}

/// max(floor, min(eps_prev, sigma_{r+1}(X_next))).
inline double epsilon_update(double eps_prev, const Vector& sigma_next, Index rank_estimate, double floor) {
  if (rank_estimate < 0 || rank_estimate + 1 > sigma_next.size()) {
    throw ParameterError("epsilon_update: rank estimate + 1 exceeds min(d1, d2)");
  }
  return std::max(floor, std::min(eps_prev, sigma_next(rank_estimate)));
}

inline double epsilon_update(double eps_prev, const Matrix& X_next, Index rank_estimate, double floor) {
  if (!(eps_prev > 0.0)) throw ParameterError("epsilon_update: eps_prev must be positive");
  return epsilon_update(eps_prev, singular_values(X_next), rank_estimate, floor);
}

inline double relative_error(const Matrix& X, const Matrix& X0) {
  const double n0 = X0.norm();
  return n0 > 0.0 ? (X - X0).norm() / n0 : (X - X0).norm();
}

/// Runs the reweighted loop until the relative change drops below
/// tol_rel_change, eps reaches exactly zero, the feasible set is a single
/// point, max_iters is hit, or a numerical failure occurs. The last computed
/// iterate is returned together with the per-iteration trace.
inline SolveResult solve(const ProblemInstance& inst, const SolverConfig& cfg) {
  inst.validate();
  cfg.validate();
  const auto& op = inst.op;
  if (op.m() == 0) throw ParameterError("solve: instance has no measurements");
  const Index d = std::min(inst.d1, inst.d2);
  if (cfg.rank_estimate + 1 > d) throw ParameterError("solve: rank estimate must be < min(d1, d2)");

  const auto t0 = std::chrono::steady_clock::now();
  const bool single_point = op.m() == inst.d1 * inst.d2;
  const double ynorm = inst.y.norm();

  std::optional<NullSpaceProjector> proj;
  if (cfg.record_stationarity && (op.is_completion() || inst.d1 * inst.d2 <= kNullSpaceCap)) proj.emplace(op);

  SolveResult out;
  SolveTrace& trace = out.trace;
  double eps = 1.0;
  WeightState w = identity_weight_state(inst.d1, inst.d2, cfg.p, cfg.variant, eps);
  std::optional<Matrix> prev;
  if (cfg.initial_iterate) {
    if (cfg.initial_iterate->rows() != inst.d1 || cfg.initial_iterate->cols() != inst.d2) {
      throw ParameterError("solve: initial iterate shape mismatch");
    }
    w = build_weight_state(*cfg.initial_iterate, eps, cfg.p, cfg.variant);
    prev = *cfg.initial_iterate;
  }
  out.X = Matrix::Zero(inst.d1, inst.d2);

  trace.status = SolveStatus::max_iters;
  for (int n = 1; n <= cfg.max_iters; ++n) {
    Matrix X;
    try {
      X = weighted_ls_step(op, inst.y, w, cfg);
    } catch (const NumericalFailure& ex) {
      trace.status = SolveStatus::numerical_failure;
      trace.message = "iteration " + std::to_string(n) + ": " + ex.what();
      break;
    }
    IterationRecord rec;
    rec.n = n;
    SvdFactors factors = svd(X);
    rec.sigma = factors.sigma;
    if (prev) {
      const double pn = prev->norm();
      rec.rel_change = pn > 0.0 ? (X - *prev).norm() / pn : std::numeric_limits<double>::infinity();
    }
    if (inst.ground_truth) rec.rel_error = relative_error(X, *inst.ground_truth);
    rec.feasibility = ynorm > 0.0 ? (apply(op, X) - inst.y).norm() / ynorm : (apply(op, X) - inst.y).norm();
    if (proj) {
      rec.stationarity = stationarity_residual(*proj, w, X);
      rec.stationarity_floor = stationarity_rounding_floor(w, X);
    }
    const double eps_next = epsilon_update(eps, rec.sigma, cfg.rank_estimate, cfg.epsilon_floor);
    rec.epsilon = eps_next;
    rec.g_eps_p = g_eps_p(rec.sigma, eps_next, cfg.p);
    const double change = rec.rel_change;
    trace.records.push_back(std::move(rec));
    out.X = X;

    if (single_point || eps_next == 0.0 || change < cfg.tol_rel_change) {
      trace.status = SolveStatus::converged;
      break;
    }
    if (n == cfg.max_iters) break;
    try {
      w = build_weight_state(factors, eps_next, cfg.p, cfg.variant);
    } catch (const SingularityError& ex) {
      trace.status = SolveStatus::numerical_failure;
      trace.message = "iteration " + std::to_string(n) + ": " + ex.what();
      break;
    }
    eps = eps_next;
    prev = std::move(X);
  }
  trace.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace hmirls

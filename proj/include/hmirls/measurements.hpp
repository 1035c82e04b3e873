#pragma once

// Linear measurement operators Phi: M_{d1 x d2} -> R^m and their adjoints,
// plus the random instance generators used by the experiments.
//
// Two kinds are supported:
//   completion  Phi(X)_l = X(i_l, j_l) for m distinct cells
//   dense       Phi(X)   = S vec(X) with an m x (d1*d2) sensing matrix S
//
// Indices are 0-based in memory; files store them 1-based.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "hmirls/errors.hpp"
#include "hmirls/linalg.hpp"
#include "hmirls/random.hpp"

namespace hmirls {

struct Entry {
  Index row = 0;
  Index col = 0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

class MeasurementOperator {
 public:
  enum class Kind { completion, dense };

  static MeasurementOperator completion(Index d1, Index d2, std::vector<Entry> entries) {
    check_dims(d1, d2);
    if (static_cast<Index>(entries.size()) > d1 * d2) {
      throw ParameterError("completion operator: more entries than cells");
    }
    std::set<std::pair<Index, Index>> seen;
    for (const auto& e : entries) {
      if (e.row < 0 || e.row >= d1 || e.col < 0 || e.col >= d2) {
        throw ParameterError("completion operator: index out of range");
      }
      if (!seen.emplace(e.row, e.col).second) {
        throw ParameterError("completion operator: duplicate index");
      }
    }
    MeasurementOperator op;
    op.kind_ = Kind::completion;
    op.d1_ = d1;
    op.d2_ = d2;
    op.entries_ = std::move(entries);
    return op;
  }

  /// Rows of `sensing` act on vec(X) (column-stacked).
  static MeasurementOperator dense(Index d1, Index d2, Matrix sensing) {
    check_dims(d1, d2);
    if (sensing.cols() != d1 * d2) {
      throw ParameterError("dense operator: sensing matrix must have d1*d2 columns");
    }
    if (sensing.rows() > d1 * d2) {
      throw ParameterError("dense operator: m exceeds d1*d2");
    }
    if (!sensing.allFinite()) {
      throw ParameterError("dense operator: non-finite sensing entries");
    }
    MeasurementOperator op;
    op.kind_ = Kind::dense;
    op.d1_ = d1;
    op.d2_ = d2;
    op.sensing_ = std::move(sensing);
    return op;
  }

  Kind kind() const noexcept { return kind_; }
  bool is_completion() const noexcept { return kind_ == Kind::completion; }
  Index d1() const noexcept { return d1_; }
  Index d2() const noexcept { return d2_; }
  Index m() const noexcept {
    return is_completion() ? static_cast<Index>(entries_.size()) : sensing_.rows();
  }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  const Matrix& sensing() const noexcept { return sensing_; }

  friend bool operator==(const MeasurementOperator&, const MeasurementOperator&) = default;

 private:
  static void check_dims(Index d1, Index d2) {
    if (d1 <= 0 || d2 <= 0) throw ParameterError("operator: dimensions must be positive");
  }

  Kind kind_ = Kind::completion;
  Index d1_ = 0;
  Index d2_ = 0;
  std::vector<Entry> entries_;
  Matrix sensing_;
};

inline Vector apply(const MeasurementOperator& op, const Matrix& X) {
  if (X.rows() != op.d1() || X.cols() != op.d2()) {
    throw ParameterError("apply: matrix shape does not match operator");
  }
  if (op.is_completion()) {
    const auto& e = op.entries();
    Vector y(op.m());
    for (std::size_t l = 0; l < e.size(); ++l) y(static_cast<Index>(l)) = X(e[l].row, e[l].col);
    return y;
  }
  return op.sensing() * vec(X);
}

inline Matrix adjoint_apply(const MeasurementOperator& op, const Vector& y) {
  if (y.size() != op.m()) {
    throw ParameterError("adjoint_apply: vector length does not match m");
  }
  if (op.is_completion()) {
    Matrix X = Matrix::Zero(op.d1(), op.d2());
    const auto& e = op.entries();
    for (std::size_t l = 0; l < e.size(); ++l) X(e[l].row, e[l].col) = y(static_cast<Index>(l));
    return X;
  }
  return mat(op.sensing().transpose() * y, op.d1(), op.d2());
}

inline Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix M(rows, cols);
  // column-major fill order is part of the reproducibility contract
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = dist(rng);
  return M;
}

inline constexpr int kDefaultResampleBudget = 10000;

/// m distinct cells drawn uniformly without replacement, redrawn wholesale
/// until every row and every column holds at least r samples. Entries are
/// returned sorted column-major.
inline MeasurementOperator sample_completion_operator(Index d1, Index d2, Index r, Index m, Rng& rng,
                                                      int max_attempts = kDefaultResampleBudget) {
  if (d1 <= 0 || d2 <= 0) throw ParameterError("sample_completion_operator: dimensions must be positive");
  if (r < 0) throw ParameterError("sample_completion_operator: r must be non-negative");
  if (m < 0 || m > d1 * d2) throw ParameterError("sample_completion_operator: m must lie in [0, d1*d2]");
  if (m < r * d1 || m < r * d2) {
    throw ParameterError("sample_completion_operator: m too small for >= r samples per row and column");
  }
  const Index cells = d1 * d2;
  std::vector<Index> pool(static_cast<std::size_t>(cells));
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::iota(pool.begin(), pool.end(), Index{0});
    // partial Fisher-Yates: first m slots become a uniform m-subset
    for (Index k = 0; k < m; ++k) {
      std::uniform_int_distribution<Index> pick(k, cells - 1);
      std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<Index> chosen(pool.begin(), pool.begin() + m);
    std::sort(chosen.begin(), chosen.end());
    std::vector<Index> per_row(static_cast<std::size_t>(d1), 0), per_col(static_cast<std::size_t>(d2), 0);
    for (Index c : chosen) {
      ++per_row[static_cast<std::size_t>(c % d1)];
      ++per_col[static_cast<std::size_t>(c / d1)];
    }
    const bool ok = std::all_of(per_row.begin(), per_row.end(), [r](Index n) { return n >= r; }) &&
                    std::all_of(per_col.begin(), per_col.end(), [r](Index n) { return n >= r; });
    if (!ok) continue;
    std::vector<Entry> entries;
    entries.reserve(chosen.size());
    for (Index c : chosen) entries.push_back({c % d1, c / d1});
    return MeasurementOperator::completion(d1, d2, std::move(entries));
  }
  throw NumericalFailure("sample_completion_operator: resampling budget exceeded");
}

/// X0 = U diag(s) V^T with U (d1 x r), V (d2 x r), s all i.i.d. N(0, 1).
inline Matrix sample_ground_truth(Index d1, Index d2, Index r, Rng& rng) {
  if (d1 <= 0 || d2 <= 0) throw ParameterError("sample_ground_truth: dimensions must be positive");
  if (r < 1 || r > std::min(d1, d2)) throw ParameterError("sample_ground_truth: r must lie in [1, min(d1,d2)]");
  const Matrix U = gaussian_matrix(d1, r, rng);
  const Matrix V = gaussian_matrix(d2, r, rng);
  const Matrix s = gaussian_matrix(r, 1, rng);
  Matrix X0 = U * s.col(0).asDiagonal() * V.transpose();
  const Vector sv = singular_values(X0);
  if (!(sv(r - 1) > 1e-10 * sv(0))) {
    throw NumericalFailure("sample_ground_truth: sampled matrix is numerically rank deficient");
  }
  return X0;
}

/// Dense operator with i.i.d. N(0, 1/m) entries.
inline MeasurementOperator sample_gaussian_operator(Index d1, Index d2, Index m, Rng& rng) {
  if (d1 <= 0 || d2 <= 0) throw ParameterError("sample_gaussian_operator: dimensions must be positive");
  if (m < 1 || m > d1 * d2) throw ParameterError("sample_gaussian_operator: m must lie in [1, d1*d2]");
  Matrix S = gaussian_matrix(m, d1 * d2, rng) / std::sqrt(static_cast<double>(m));
  return MeasurementOperator::dense(d1, d2, std::move(S));
}

inline constexpr Index kNullSpaceCap = 4096;

/// Orthonormal basis (Frobenius inner product) of the kernel of Phi.
inline std::vector<Matrix> null_space_basis(const MeasurementOperator& op, Index cap = kNullSpaceCap) {
  const Index d1 = op.d1(), d2 = op.d2();
  std::vector<Matrix> basis;
  if (op.is_completion()) {
    std::vector<char> sampled(static_cast<std::size_t>(d1 * d2), 0);
    for (const auto& e : op.entries()) sampled[static_cast<std::size_t>(e.row + e.col * d1)] = 1;
    for (Index c = 0; c < d1 * d2; ++c) {
      if (sampled[static_cast<std::size_t>(c)]) continue;
      Matrix B = Matrix::Zero(d1, d2);
      B(c % d1, c / d1) = 1.0;
      basis.push_back(std::move(B));
    }
    return basis;
  }
  if (d1 * d2 > cap) {
    throw ParameterError("null_space_basis: d1*d2 exceeds the dense null-space cap");
  }
  // columns rank..n of the full Q in S^T P = Q R span ker(S)
  Eigen::ColPivHouseholderQR<Matrix> qr(op.sensing().transpose());
  const Index n = d1 * d2;
  const Index k = qr.rank();
  const Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
  for (Index c = k; c < n; ++c) basis.push_back(mat(Q.col(c), d1, d2));
  return basis;
}

struct ProblemInstance {
  Index d1 = 0;
  Index d2 = 0;
  std::optional<Index> rank;
  MeasurementOperator op;
  Vector y;
  std::optional<Matrix> ground_truth;
  std::optional<std::uint64_t> seed;

  /// Throws ParameterError when fields are inconsistent.
  void validate() const {
    if (d1 <= 0 || d2 <= 0) throw ParameterError("instance: dimensions must be positive");
    if (op.d1() != d1 || op.d2() != d2) throw ParameterError("instance: operator shape mismatch");
    if (y.size() != op.m()) throw ParameterError("instance: y length does not match m");
    if (rank && (*rank < 1 || *rank > std::min(d1, d2))) throw ParameterError("instance: rank out of range");
    if (ground_truth) {
      if (ground_truth->rows() != d1 || ground_truth->cols() != d2) {
        throw ParameterError("instance: ground truth shape mismatch");
      }
      const double res = (apply(op, *ground_truth) - y).norm();
      if (res > 1e-12 * std::max(1.0, y.norm())) {
        throw ParameterError("instance: ground truth inconsistent with y");
      }
    }
  }
};

/// Degrees of freedom of a d1 x d2 rank-r matrix.
inline Index degrees_of_freedom(Index d1, Index d2, Index r) { return r * (d1 + d2 - r); }

/// m = floor(rho * d_f).
inline Index measurements_for(double rho, Index d1, Index d2, Index r) {
  return static_cast<Index>(std::floor(rho * static_cast<double>(degrees_of_freedom(d1, d2, r))));
}

/// Completion instance from the random model: ground truth first, then mask.
inline ProblemInstance generate_completion_instance(Index d1, Index d2, Index r, Index m, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Matrix X0 = sample_ground_truth(d1, d2, r, rng);
  MeasurementOperator op = sample_completion_operator(d1, d2, r, m, rng);
  ProblemInstance inst{d1, d2, r, op, apply(op, X0), std::move(X0), seed};
  return inst;
}

}  // namespace hmirls

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "hmirls/measurements.hpp"
#include "hmirls/worked_example.hpp"
#include "test_support.hpp"

using namespace hmirls;
using hmirls::testing::random_matrix;

namespace {

Vector random_vector(Index n, Rng& rng) { return random_matrix(n, 1, rng).col(0); }

}  // namespace

TEST(Apply, WorkedExampleEntries) {
  const ProblemInstance inst = worked_example_instance();
  // 1-based (2,1) and (1,4) of the ground truth
  EXPECT_EQ((*inst.ground_truth)(1, 0), 10.0);
  EXPECT_EQ((*inst.ground_truth)(0, 3), 4.0);
  const auto op = MeasurementOperator::completion(4, 4, {{1, 0}, {0, 3}});
  const Vector y = apply(op, *inst.ground_truth);
  EXPECT_EQ(y(0), 10.0);
  EXPECT_EQ(y(1), 4.0);
}

TEST(Apply, ZeroAndIdentityRows) {
  const auto op = MeasurementOperator::completion(3, 2, {{0, 0}, {2, 1}});
  EXPECT_EQ(apply(op, Matrix::Zero(3, 2)), Vector::Zero(2));
  const auto dense = MeasurementOperator::dense(3, 2, Matrix::Identity(6, 6));
  Rng rng = make_rng(1);
  const Matrix X = random_matrix(3, 2, rng);
  EXPECT_EQ(apply(dense, X), vec(X));
  EXPECT_THROW(apply(op, Matrix::Zero(2, 3)), ParameterError);
}

TEST(Adjoint, UnitVectorAndZero) {
  const auto op = MeasurementOperator::completion(3, 3, {{2, 1}, {0, 0}});
  Matrix E = Matrix::Zero(3, 3);
  E(2, 1) = 1.0;
  EXPECT_EQ(adjoint_apply(op, Vector::Unit(2, 0)), E);
  EXPECT_EQ(adjoint_apply(op, Vector::Zero(2)), Matrix::Zero(3, 3));
  EXPECT_THROW(adjoint_apply(op, Vector::Zero(3)), ParameterError);
}

TEST(Adjoint, InnerProductIdentityForBothKinds) {
  Rng rng = make_rng(2);
  const auto comp = sample_completion_operator(6, 5, 1, 14, rng);
  const auto dense = sample_gaussian_operator(6, 5, 11, rng);
  for (const auto* op : {&comp, &dense}) {
    for (int t = 0; t < 100; ++t) {
      const Matrix X = random_matrix(6, 5, rng);
      const Vector y = random_vector(op->m(), rng);
      const double lhs = apply(*op, X).dot(y);
      const double rhs = X.cwiseProduct(adjoint_apply(*op, y)).sum();
      EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST(Completion, ForwardAfterAdjointIsIdentity) {
  Rng rng = make_rng(3);
  const auto op = sample_completion_operator(7, 9, 2, 30, rng);
  const Vector y = random_vector(op.m(), rng);
  EXPECT_EQ(apply(op, adjoint_apply(op, y)), y);
}

TEST(Completion, RejectsDuplicatesAndOutOfRange) {
  EXPECT_THROW(MeasurementOperator::completion(2, 2, {{0, 0}, {0, 0}}), ParameterError);
  EXPECT_THROW(MeasurementOperator::completion(2, 2, {{2, 0}}), ParameterError);
  EXPECT_THROW(MeasurementOperator::completion(0, 2, {}), ParameterError);
  EXPECT_THROW(MeasurementOperator::dense(2, 2, Matrix::Ones(2, 3)), ParameterError);
}

TEST(SampleCompletion, FullMaskWhenEveryCellIsDrawn) {
  Rng rng = make_rng(4);
  const auto op = sample_completion_operator(2, 2, 1, 4, rng);
  EXPECT_EQ(op.m(), 4);
}

TEST(SampleCompletion, EnforcesRowAndColumnRule) {
  Rng rng = make_rng(5);
  const Index m = measurements_for(2.0, 40, 40, 10);
  ASSERT_EQ(m, 1400);
  for (int t = 0; t < 5; ++t) {
    const auto op = sample_completion_operator(40, 40, 10, m, rng);
    std::vector<int> rows(40, 0), cols(40, 0);
    for (const auto& e : op.entries()) {
      ++rows[e.row];
      ++cols[e.col];
    }
    for (int k = 0; k < 40; ++k) {
      EXPECT_GE(rows[k], 10);
      EXPECT_GE(cols[k], 10);
    }
  }
}

TEST(SampleCompletion, EntriesAreDistinctAndSortedColumnMajor) {
  Rng rng = make_rng(6);
  const auto op = sample_completion_operator(9, 7, 2, 40, rng);
  std::set<std::pair<Index, Index>> seen;
  Index prev = -1;
  for (const auto& e : op.entries()) {
    EXPECT_TRUE(seen.emplace(e.row, e.col).second);
    const Index lin = e.row + e.col * 9;
    EXPECT_GT(lin, prev);
    prev = lin;
  }
}

TEST(SampleCompletion, InclusionFrequencyIsUniform) {
  // 1000 conditioned draws at d = 8, r = 2, m = 40: every cell's inclusion
  // count must lie within 5 binomial standard deviations of 1000 * 40 / 64.
  Rng rng = make_rng(7);
  const int draws = 1000;
  std::vector<int> hits(64, 0);
  for (int t = 0; t < draws; ++t) {
    const auto op = sample_completion_operator(8, 8, 2, 40, rng);
    std::vector<int> rows(8, 0), cols(8, 0);
    for (const auto& e : op.entries()) {
      ++hits[e.row + 8 * e.col];
      ++rows[e.row];
      ++cols[e.col];
    }
    for (int k = 0; k < 8; ++k) ASSERT_TRUE(rows[k] >= 2 && cols[k] >= 2);
  }
  const double pincl = 40.0 / 64.0;
  const double mean = draws * pincl;
  const double sd = std::sqrt(draws * pincl * (1.0 - pincl));
  for (int c = 0; c < 64; ++c) EXPECT_LE(std::abs(hits[c] - mean), 5.0 * sd) << "cell " << c;
}

TEST(SampleCompletion, InfeasibleOrExhausted) {
  Rng rng = make_rng(8);
  EXPECT_THROW(sample_completion_operator(10, 10, 3, 29, rng), ParameterError);
  EXPECT_THROW(sample_completion_operator(3, 3, 1, 10, rng), ParameterError);
  // feasible in count but practically never satisfied
  EXPECT_THROW(sample_completion_operator(30, 30, 3, 90, rng, 5), NumericalFailure);
}

TEST(SampleCompletion, DeterministicForSeed) {
  Rng a = make_rng(99), b = make_rng(99);
  EXPECT_EQ(sample_completion_operator(12, 10, 2, 50, a), sample_completion_operator(12, 10, 2, 50, b));
}

TEST(GroundTruth, RankAndDeterminism) {
  Rng a = make_rng(42), b = make_rng(42);
  EXPECT_EQ(sample_ground_truth(6, 6, 2, a), sample_ground_truth(6, 6, 2, b));
  Rng rng = make_rng(43);
  const Matrix X = sample_ground_truth(20, 20, 3, rng);
  const Vector s = singular_values(X);
  EXPECT_LT(s(3) / s(0), 1e-12);
  EXPECT_GT(s(2) / s(0), 1e-10);
  const Matrix F = sample_ground_truth(5, 4, 4, rng);
  EXPECT_EQ(rank(F), 4);
  EXPECT_THROW(sample_ground_truth(5, 4, 5, rng), ParameterError);
  EXPECT_THROW(sample_ground_truth(5, 4, 0, rng), ParameterError);
}

TEST(GaussianOperator, ColumnNormsNearOne) {
  Rng rng = make_rng(44);
  const auto op = sample_gaussian_operator(20, 20, 200, rng);
  const double mean_sq = op.sensing().colwise().squaredNorm().mean();
  EXPECT_GE(mean_sq, 0.9);
  EXPECT_LE(mean_sq, 1.1);
}

TEST(GaussianOperator, FullSizeIsInvertibleAndSeeded) {
  Rng rng = make_rng(45);
  const auto op = sample_gaussian_operator(3, 4, 12, rng);
  Eigen::FullPivLU<Matrix> lu(op.sensing());
  EXPECT_EQ(lu.rank(), 12);
  Rng a = make_rng(46), b = make_rng(46);
  EXPECT_EQ(sample_gaussian_operator(3, 3, 5, a), sample_gaussian_operator(3, 3, 5, b));
}

TEST(NullSpace, CompletionUnitMatrices) {
  const auto full = MeasurementOperator::completion(2, 2, {{0, 0}, {1, 0}, {0, 1}, {1, 1}});
  EXPECT_TRUE(null_space_basis(full).empty());
  const auto basis = null_space_basis(worked_example_instance().op);
  ASSERT_EQ(basis.size(), 9u);
  for (const auto& B : basis) {
    EXPECT_EQ(B.sum(), 1.0);
    EXPECT_EQ(B.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_EQ(apply(worked_example_instance().op, B).norm(), 0.0);
  }
}

TEST(NullSpace, DenseKernelIsOrthonormalAndAnnihilated) {
  Rng rng = make_rng(47);
  const auto op = sample_gaussian_operator(3, 3, 6, rng);
  const auto basis = null_space_basis(op);
  ASSERT_EQ(basis.size(), 3u);
  for (std::size_t a = 0; a < basis.size(); ++a) {
    EXPECT_LE(apply(op, basis[a]).norm(), 1e-10);
    for (std::size_t b = 0; b < basis.size(); ++b) {
      EXPECT_NEAR(basis[a].cwiseProduct(basis[b]).sum(), a == b ? 1.0 : 0.0, 1e-12);
    }
  }
  const auto big = sample_gaussian_operator(70, 70, 3, rng);
  EXPECT_THROW(null_space_basis(big), ParameterError);
}

TEST(Instance, ValidationAndDegreesOfFreedom) {
  EXPECT_EQ(degrees_of_freedom(4, 4, 1), 7);
  EXPECT_EQ(measurements_for(2.6, 100, 100, 8), 3993);
  ProblemInstance inst = generate_completion_instance(10, 8, 2, 40, 5);
  EXPECT_NO_THROW(inst.validate());
  EXPECT_EQ(inst.op.m(), 40);
  inst.y(0) += 1.0;
  EXPECT_THROW(inst.validate(), ParameterError);
  const ProblemInstance again = generate_completion_instance(10, 8, 2, 40, 5);
  EXPECT_EQ(again.op, generate_completion_instance(10, 8, 2, 40, 5).op);
  EXPECT_EQ(*again.ground_truth, *generate_completion_instance(10, 8, 2, 40, 5).ground_truth);
}

TEST(Seeds, DerivedSeedsDifferPerCoordinate) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 10; ++a)
    for (std::uint64_t b = 0; b < 10; ++b) EXPECT_TRUE(seen.insert(derive_seed(1, a, b)).second);
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
}

#include <gtest/gtest.h>

#include "allpass/linalg.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace allpass;
using oracle::diag;
using oracle::mat;

namespace {

// --- solve_stein_sym -------------------------------------------------------

TEST(SteinSym, ScalarRemarkChannel) {
  // 4P - P = 9
  const auto s = solve_stein_sym(mat({{2}}), mat({{9}}), SteinForm::Direct);
  ASSERT_TRUE(s.particular);
  EXPECT_NEAR((*s.particular)(0, 0), 3.0, 1e-12);
  EXPECT_TRUE(s.homogeneous_basis.empty());
}

TEST(SteinSym, ZeroA) {
  const auto s = solve_stein_sym(mat({{0}}), mat({{1}}), SteinForm::Direct);
  ASSERT_TRUE(s.particular);
  EXPECT_NEAR((*s.particular)(0, 0), -1.0, 1e-12);
  EXPECT_TRUE(s.homogeneous_basis.empty());
}

TEST(SteinSym, RemarkThreeMixed) {
  const Matrix A = diag({2, 0.5});
  const auto s = solve_stein_sym(A, Matrix::Identity(2, 2), SteinForm::Transposed);
  ASSERT_TRUE(s.particular);
  // The minimum-norm particular solution is the q = 0 member.
  EXPECT_LT((*s.particular - diag({1.0 / 3, -4.0 / 3})).norm(), 1e-12);
  ASSERT_EQ(s.homogeneous_basis.size(), 1u);
  const Matrix expected = mat({{0, 1}, {1, 0}}) / std::sqrt(2.0);
  EXPECT_LT((s.homogeneous_basis[0] - expected).norm(), 1e-12);
}

TEST(SteinSym, AgreesWithKroneckerOracle) {
  testgen::Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 1 + trial % 6;
    const Matrix A = testgen::random_A(rng, n, testgen::Kind::Unmixed).A;
    const Matrix G = testgen::gaussian(rng, n, n);
    const Matrix R = G + G.transpose();
    for (bool transposed : {false, true}) {
      const auto s = solve_stein_sym(A, R, transposed ? SteinForm::Transposed : SteinForm::Direct);
      ASSERT_TRUE(s.particular);
      const Matrix ref = oracle::stein_solve(A, R, transposed);
      EXPECT_LT((*s.particular - ref).norm(), 1e-9 * std::max(1.0, ref.norm()));
      EXPECT_TRUE(s.homogeneous_basis.empty());
    }
  }
}

TEST(SteinSym, InconsistentRightHandSideHasNoParticular) {
  // A = diag(2, 1/2): the (1,2) entry of the equation reads 0 = rhs_12.
  const auto s = solve_stein_sym(diag({2, 0.5}), mat({{1, 1}, {1, 1}}), SteinForm::Direct);
  EXPECT_FALSE(s.particular);
  EXPECT_GT(s.residual, 0.1);
}

TEST(SteinSym, RejectsBadInput) {
  EXPECT_THROW(solve_stein_sym(Matrix::Zero(2, 3), Matrix::Zero(2, 2), SteinForm::Direct),
               DimensionError);
  EXPECT_THROW(solve_stein_sym(Matrix::Zero(2, 2), mat({{0, 1}, {0, 0}}), SteinForm::Direct),
               DimensionError);
}

TEST(SteinSym, HomogeneousDimensionMatchesSpectrum) {
  testgen::Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 2 + trial % 5;
    const Matrix A = testgen::random_A(rng, n, testgen::Kind::Mixed).A;
    const auto s = solve_stein_sym(A, Matrix::Zero(n, n), SteinForm::Direct);
    EXPECT_EQ(static_cast<int>(s.homogeneous_basis.size()), oracle::homogeneous_dimension(A));
    for (const auto& H : s.homogeneous_basis) {
      EXPECT_LT((A * H * A.transpose() - H).norm(), 1e-9 * std::max(1.0, norm2(A) * norm2(A)));
      EXPECT_LT((H - H.transpose()).norm(), 1e-14);
    }
  }
}

TEST(SteinSym, EmptyMatrix) {
  const auto s = solve_stein_sym(Matrix(0, 0), Matrix(0, 0), SteinForm::Direct);
  ASSERT_TRUE(s.particular);
  EXPECT_EQ(s.particular->size(), 0);
}

// --- psd_rank_factor -------------------------------------------------------

TEST(PsdRankFactor, Identity) {
  EXPECT_LT((psd_rank_factor(Matrix::Identity(2, 2), 2) - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(PsdRankFactor, NMatrixOfSingularSolution) {
  const Matrix W = mat({{0, 0, 0, 0}, {0, 1, 0, 0.5}, {0, 0, 1, 0}, {0, 0.5, 0, 0.25}});
  const Matrix F = psd_rank_factor(W, 2);
  ASSERT_EQ(F.rows(), 2);
  EXPECT_LT((F.transpose() * F - W).norm(), 1e-12);
  // Row space is spanned by (0,1,0,1/2) and (0,0,1,0).
  Matrix span(4, 2);
  span.col(0) << 0, 1, 0, 0.5;
  span.col(1) << 0, 0, 1, 0;
  const Subspace rows = Subspace::span(F.transpose());
  EXPECT_LT(rows.distance(Subspace::span(span)), 1e-12);
}

TEST(PsdRankFactor, ZeroRank) {
  const Matrix F = psd_rank_factor(Matrix::Zero(3, 3), 0);
  EXPECT_EQ(F.rows(), 0);
  EXPECT_EQ(F.cols(), 3);
}

TEST(PsdRankFactor, Errors) {
  EXPECT_THROW(psd_rank_factor(diag({1, -1}), 1), PreconditionError);
  EXPECT_THROW(psd_rank_factor(diag({1, 1}), 1), PreconditionError);
}

TEST(PsdRankFactor, DeterministicSigns) {
  const Matrix W = mat({{2, -1}, {-1, 2}});
  const Matrix F = psd_rank_factor(W, 2);
  for (Eigen::Index i = 0; i < 2; ++i) EXPECT_GT(F(i, 0), 0.0);
  EXPECT_EQ((F - psd_rank_factor(W, 2)).norm(), 0.0);
}

TEST(PsdRankFactor, RandomLowRank) {
  testgen::Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index k = 2 + trial % 6, m = 1 + trial % k;
    const Matrix G = testgen::gaussian(rng, m, k);
    const Matrix W = G.transpose() * G;
    const Matrix F = psd_rank_factor(W, m);
    EXPECT_EQ(F.rows(), m);
    EXPECT_LT((F.transpose() * F - W).norm(), 1e-9 * W.norm());
    EXPECT_EQ(numerical_rank(F), m);
  }
}

// --- pinv ------------------------------------------------------------------

void expect_penrose(const Matrix& M, const Matrix& X, double eps) {
  EXPECT_LT((M * X * M - M).norm(), eps);
  EXPECT_LT((X * M * X - X).norm(), eps);
  EXPECT_LT((M * X - (M * X).transpose()).norm(), eps);
  EXPECT_LT((X * M - (X * M).transpose()).norm(), eps);
}

TEST(Pinv, Examples) {
  EXPECT_LT((pinv(diag({3, -0.75, 0})) - diag({1.0 / 3, -4.0 / 3, 0})).norm(), 1e-14);
  EXPECT_LT((pinv(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm(), 1e-15);
  EXPECT_LT((pinv(mat({{1, 0}, {0, 0}})) - mat({{1, 0}, {0, 0}})).norm(), 1e-15);
}

TEST(Pinv, PenroseIdentities) {
  testgen::Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index r = 1 + trial % 5, c = 1 + (trial / 2) % 5, k = 1 + trial % std::min(r, c);
    const Matrix M = testgen::gaussian(rng, r, k) * testgen::gaussian(rng, k, c);
    expect_penrose(M, pinv(M), 1e-9 * std::max(1.0, M.norm() * M.norm()));
  }
}

// --- polar_orthogonal --------------------------------------------------------

TEST(Polar, Examples) {
  EXPECT_LT((polar_orthogonal(mat({{-2}})) - mat({{-1}})).norm(), 1e-15);
  const Matrix R = mat({{0.6, -0.8}, {0.8, 0.6}});
  EXPECT_LT((polar_orthogonal(R) - R.transpose()).norm(), 1e-14);
  const Matrix D = mat({{0, 0.5}, {1, 0}});
  const Matrix U = polar_orthogonal(D);
  EXPECT_LT((U - mat({{0, 1}, {1, 0}})).norm(), 1e-14);
  EXPECT_LT((D * U - diag({0.5, 1})).norm(), 1e-14);
}

TEST(Polar, Invariants) {
  testgen::Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index m = 1 + trial % 4;
    Matrix D = testgen::gaussian(rng, m, m);
    if (trial % 3 == 0 && m > 1) D.col(0).setZero();  // singular case
    const Matrix U = polar_orthogonal(D);
    EXPECT_LT((U.transpose() * U - Matrix::Identity(m, m)).norm(), 1e-12);
    const Matrix S = D * U;
    EXPECT_LT((S - S.transpose()).norm(), 1e-12 * std::max(1.0, D.norm()));
    EXPECT_GT(oracle::sym_eigenvalues(S).minCoeff(), -1e-12 * std::max(1.0, D.norm()));
  }
}

// --- inertia, eigen structure ----------------------------------------------

TEST(Inertia, Examples) {
  const auto a = inertia(diag({3, -0.75}));
  EXPECT_EQ(a.n_plus, 1);
  EXPECT_EQ(a.n_minus, 1);
  EXPECT_EQ(a.n_zero, 0);
  const auto b = inertia(Matrix::Zero(2, 2));
  EXPECT_EQ(b.n_zero, 2);
  const auto c = inertia(Matrix::Identity(3, 3));
  EXPECT_EQ(c.n_plus, 3);
}

TEST(Unmixed, Examples) {
  EXPECT_FALSE(is_unmixed(diag({2, 0.5})));
  EXPECT_TRUE(is_unmixed(diag({2, 3})));
  EXPECT_FALSE(is_unmixed(mat({{1}})));
  // eigenvalues +-i have modulus one
  EXPECT_FALSE(is_unmixed(mat({{0, -1}, {1, 0}})));
}

TEST(Unmixed, ImpliesTrivialHomogeneousSpace) {
  testgen::Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 1 + trial % 7;
    const Matrix A = testgen::random_A(rng, n, testgen::Kind::Unmixed).A;
    ASSERT_TRUE(is_unmixed(A));
    EXPECT_TRUE(
        solve_stein_sym(A, Matrix::Zero(n, n), SteinForm::Transposed).homogeneous_basis.empty());
  }
}

// --- Subspace ---------------------------------------------------------------

TEST(SubspaceBasics, ProjectorAndComplement) {
  const Subspace S = Subspace::span(mat({{1, 1}, {1, 0}, {0, 0}}));
  EXPECT_EQ(S.dim(), 2);
  const Matrix Pi = S.projector();
  EXPECT_LT((Pi * Pi - Pi).norm(), 1e-14);
  EXPECT_LT((Pi - Pi.transpose()).norm(), 1e-15);
  const Subspace T = S.complement();
  EXPECT_EQ(T.dim(), 1);
  EXPECT_LT((S.basis().transpose() * T.basis()).norm(), 1e-14);
  EXPECT_EQ(Subspace::zero(3).complement().dim(), 3);
  EXPECT_EQ(Subspace::full(3).complement().dim(), 0);
}

// --- invariant_subspaces -----------------------------------------------------

TEST(InvariantSubspaces, DiagonalRemarkMatrix) {
  const auto subs = invariant_subspaces(diag({2, 0.5}), 16);
  ASSERT_EQ(subs.size(), 4u);
  EXPECT_EQ(subs.front().dim(), 0);
  EXPECT_EQ(subs.back().dim(), 2);
  const Subspace e1 = Subspace::span(mat({{1}, {0}}));
  const Subspace e2 = Subspace::span(mat({{0}, {1}}));
  bool has1 = false, has2 = false;
  for (const auto& s : subs) {
    if (s.dim() != 1) continue;
    has1 = has1 || s.distance(e1) < 1e-12;
    has2 = has2 || s.distance(e2) < 1e-12;
  }
  EXPECT_TRUE(has1);
  EXPECT_TRUE(has2);
}

TEST(InvariantSubspaces, RotationHasOnlyTrivial) {
  const auto subs = invariant_subspaces(mat({{0, -1}, {1, 0}}), 16);
  ASSERT_EQ(subs.size(), 2u);
  EXPECT_EQ(subs[0].dim(), 0);
  EXPECT_EQ(subs[1].dim(), 2);
}

TEST(InvariantSubspaces, IdentityTruncated) {
  const auto subs = invariant_subspaces(Matrix::Identity(4, 4), 4);
  ASSERT_EQ(subs.size(), 4u);
  EXPECT_EQ(subs.front().dim(), 0);
  EXPECT_EQ(subs.back().dim(), 4);
}

TEST(InvariantSubspaces, RandomAreInvariantAndCountMatches) {
  testgen::Rng rng(2);
  for (int trial = 0; trial < 15; ++trial) {
    const Eigen::Index n = 1 + trial % 7;
    const Matrix A = testgen::random_A(rng, n, testgen::Kind::Unmixed).A;
    const auto subs = invariant_subspaces(A, 1000);
    // Distinct eigenvalues: one subspace per subset of Schur blocks.
    int real = 0, pairs = 0;
    const auto ev = eigenvalues(A);
    for (Eigen::Index i = 0; i < ev.size(); ++i) (std::abs(ev(i).imag()) < 1e-12 ? real : pairs)++;
    EXPECT_EQ(subs.size(), std::size_t{1} << (real + pairs / 2));
    for (const auto& s : subs) {
      const Matrix& V = s.basis();
      EXPECT_LT((A * V - V * (V.transpose() * A * V)).norm(), 1e-9 * std::max(1.0, norm2(A)));
      EXPECT_LT((V.transpose() * V - Matrix::Identity(V.cols(), V.cols())).norm(), 1e-12);
    }
  }
}

}  // namespace

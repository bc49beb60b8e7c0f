#include <gtest/gtest.h>

#include "allpass/deflate.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace allpass;
using oracle::diag;
using oracle::mat;

namespace {

const StateSpace kChannel(mat({{2}}), mat({{3}}), mat({{1}}), mat({{2}}));
const StateSpace kDelay(mat({{0}}), mat({{1}}), mat({{1}}), mat({{0}}));

StateSpace remark3() {
  return StateSpace(diag({2, 0.5}), diag({3, -0.75}), Matrix::Identity(2, 2), diag({2, 0.5}));
}

/// diag(f, g) as a single realization.
StateSpace block_diag(const StateSpace& f, const StateSpace& g) {
  auto bd = [](const Matrix& a, const Matrix& b) {
    Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a;
    out.bottomRightCorner(b.rows(), b.cols()) = b;
    return out;
  };
  return StateSpace(bd(f.A, g.A), bd(f.B, g.B), bd(f.C, g.C), bd(f.D, g.D));
}

TEST(SilvermanStep, UnitDelay) {
  const auto st = silverman_step(kDelay);
  ASSERT_FALSE(st.done);
  EXPECT_EQ(st.q, 0);
  EXPECT_NEAR(std::abs(st.V(0, 0)), 1.0, 1e-15);
  EXPECT_LT(st.next.B.norm(), 1e-15);
  EXPECT_NEAR(std::abs(st.next.D(0, 0)), 1.0, 1e-15);
  // Q(z) * z = 1.
  for (Complex z : oracle::circle(5))
    EXPECT_NEAR(std::abs(evaluate(st.next, z)(0, 0)), 1.0, 1e-14);
  EXPECT_TRUE(silverman_step(st.next).done);
}

TEST(SilvermanStep, NonsingularDIsDone) {
  const auto st = silverman_step(remark3());
  EXPECT_TRUE(st.done);
  EXPECT_EQ(st.q, 2);
}

TEST(SilvermanStep, OneDelayedChannel) {
  const StateSpace s = block_diag(kDelay, kChannel);  // D = diag(0, 2)
  const auto st = silverman_step(s);
  ASSERT_FALSE(st.done);
  EXPECT_EQ(st.q, 1);
  EXPECT_LT((st.V.cwiseAbs() - mat({{0, 1}, {1, 0}})).norm(), 1e-14);
  EXPECT_TRUE(silverman_step(st.next).done);
  // next(z) = Q(z) V diag(1, z).
  for (Complex z : oracle::circle(9)) {
    CMatrix shift = CMatrix::Identity(2, 2);
    shift(1, 1) = z;
    const CMatrix expect = oracle::eval(s, z) * st.V.cast<Complex>() * shift;
    EXPECT_LT((evaluate(st.next, z) - expect).norm(), 1e-12);
  }
}

TEST(Qbar, Examples) {
  const auto d = qbar_realization({mat({{1}}), 1}, 1);
  for (Complex z : oracle::circle(7)) EXPECT_LT(std::abs(evaluate(d, z)(0, 0) - 1.0 / z), 1e-14);

  const auto h = qbar_realization({Matrix::Identity(2, 2), 1}, 2);
  for (Complex z : oracle::circle(7)) {
    CMatrix expect = CMatrix::Zero(2, 2);
    expect(0, 0) = 1.0;
    expect(1, 1) = 1.0 / z;
    EXPECT_LT((evaluate(h, z) - expect).norm(), 1e-14);
  }

  const Matrix swap = mat({{0, 1}, {1, 0}});
  const auto two = qbar_realization({swap, 2}, 2);
  EXPECT_EQ(two.n(), 2);
  EXPECT_LE(allpass_defect(two, 64).defect, 1e-12);
  for (Complex z : oracle::circle(7))
    EXPECT_LT((evaluate(two, z) - swap.cast<Complex>() / z).norm(), 1e-14);
  EXPECT_EQ(two.A.norm(), 0.0);
}

TEST(Qbar, RangeErrors) {
  EXPECT_THROW(qbar_realization({Matrix::Identity(2, 2), 0}, 2), DimensionError);
  EXPECT_THROW(qbar_realization({Matrix::Identity(2, 2), 3}, 2), DimensionError);
  EXPECT_THROW(qbar_realization({Matrix::Identity(3, 3), 1}, 2), DimensionError);
}

TEST(Deflate, BiproperHasNoSteps) {
  const auto d = deflate_at_infinity(remark3());
  EXPECT_TRUE(d.steps.empty());
  EXPECT_LT(oracle::circle_distance(d.q0, remark3()), 1e-12);
}

TEST(Deflate, UnitDelay) {
  const auto d = deflate_at_infinity(kDelay);
  ASSERT_EQ(d.steps.size(), 1u);
  EXPECT_EQ(d.steps[0].p, 1);
  EXPECT_NEAR(std::abs(d.steps[0].U(0, 0)), 1.0, 1e-15);
  EXPECT_EQ(d.q0.n(), 0);
  EXPECT_NEAR(std::abs(d.q0.D(0, 0)), 1.0, 1e-14);
  EXPECT_LT(oracle::circle_distance(d.recompose(), kDelay), 1e-13);
  EXPECT_LE(d.recomposition_distance, 1e-12);
}

TEST(Deflate, OneDelayedChannel) {
  const StateSpace s = block_diag(kChannel, kDelay);
  const auto d = deflate_at_infinity(s);
  ASSERT_EQ(d.steps.size(), 1u);
  EXPECT_EQ(d.steps[0].p, 1);
  EXPECT_EQ(d.q0.n(), 1);
  EXPECT_GT(d.q0.D.jacobiSvd().singularValues().minCoeff(), 1e-6);
  EXPECT_TRUE(is_allpass(d.q0).is_allpass);
  EXPECT_LT(oracle::circle_distance(d.recompose(), s), 1e-12);
}

TEST(Deflate, RejectsNonAllPass) {
  // Rank-deficient rational matrix: D stays singular forever.
  const StateSpace s(mat({{0.5}}), mat({{1, 1}}), mat({{1}, {1}}), Matrix::Zero(2, 2));
  EXPECT_THROW(deflate_at_infinity(s), PreconditionError);
}

TEST(ComposeStep, ConstantBase) {
  const Matrix W = mat({{0.6, -0.8}, {0.8, 0.6}});
  const DeflationStep step{mat({{0, 1}, {1, 0}}), 1};
  const auto out = compose_step(StateSpace::constant(W), step);
  EXPECT_EQ(out.n(), 1);
  const auto qb = qbar_realization(step, 2);
  for (Complex z : oracle::circle(9))
    EXPECT_LT((evaluate(out, z) - W.cast<Complex>() * oracle::eval(qb, z)).norm(), 1e-13);
}

TEST(ComposeStep, RemarkWithDelayedChannel) {
  const StateSpace s = remark3();
  const DeflationStep step{Matrix::Identity(2, 2), 1};
  const auto out = compose_step(s, step);
  EXPECT_EQ(out.n(), 3);
  EXPECT_EQ(oracle::krylov_rank(out.A, out.B), 3);
  for (Complex z : oracle::circle(9)) {
    CMatrix shift = CMatrix::Identity(2, 2);
    shift(1, 1) = 1.0 / z;
    EXPECT_LT((evaluate(out, z) - oracle::eval(s, z) * shift).norm(), 1e-12);
  }
  // diag(-I_p, P0) solves the P-side equations of the composed realization
  // (the delay state contributes -1, as for the unit delay).
  Matrix P1 = Matrix::Zero(3, 3);
  P1(0, 0) = -1.0;
  P1.bottomRightCorner(2, 2) = diag({3, -0.75});
  const auto r = certificate_residuals(out, P1, Matrix::Zero(3, 3));
  EXPECT_LT(r.eq[0], 1e-12);
  EXPECT_LT(r.eq[1], 1e-12);
  EXPECT_LT(r.eq[2], 1e-12);
}

TEST(ComposeStep, ChainedTwice) {
  const StateSpace s = remark3();
  const auto one = compose_step(s, {Matrix::Identity(2, 2), 1});
  const DeflationStep second{mat({{0, 1}, {1, 0}}), 2};
  const auto two = compose_step(one, second);
  EXPECT_EQ(two.n(), one.n() + 2);
  EXPECT_EQ(oracle::krylov_rank(two.A, two.B), two.n());
  const auto expect = series(series(s, qbar_realization({Matrix::Identity(2, 2), 1}, 2)),
                             qbar_realization(second, 2));
  EXPECT_LT(oracle::circle_distance(two, expect), 1e-12);
}

TEST(ComposeStep, RejectsUnreachable) {
  const StateSpace s(diag({2, 0.3}), mat({{3}, {0}}), mat({{1, 1}}), mat({{2}}));
  EXPECT_THROW(compose_step(s, {mat({{1}}), 1}), PreconditionError);
}

TEST(DeflateProperties, RecomposesDelayedCores) {
  testgen::Rng rng(808);
  const auto corpus = testgen::corpus(40, 909);
  int count = 0;
  for (const auto& inst : corpus) {
    if (inst.kind == testgen::Kind::Singular) continue;
    const Eigen::Index m = inst.sys.m();
    StateSpace s = inst.sys;
    const int k = 1 + static_cast<int>(rng() % 2);
    for (int i = 0; i < k; ++i) s = series(s, qbar_realization(testgen::random_delay_step(rng, m), m));
    const auto d = deflate_at_infinity(s);
    const Eigen::Index n = minimal_realization(s).first.n();
    EXPECT_LE(static_cast<Eigen::Index>(d.steps.size()), n) << inst.label;
    EXPECT_GT(d.q0.D.jacobiSvd().singularValues().minCoeff(), 1e-6) << inst.label;
    EXPECT_LE(d.recomposition_distance, 1e-7) << inst.label;
    EXPECT_LT(oracle::circle_distance(d.recompose(), s), 1e-6 * (1 + s.D.norm())) << inst.label;
    EXPECT_TRUE(is_allpass(d.q0).is_allpass) << inst.label;
    for (const auto& st : d.steps) {
      EXPECT_LT((st.U.transpose() * st.U - Matrix::Identity(m, m)).norm(), 1e-12);
      EXPECT_GE(st.p, 1);
      EXPECT_LE(st.p, m);
    }
    ++count;
  }
  EXPECT_GE(count, 15);
}

TEST(DeflateProperties, SingularCorpusInstances) {
  for (const auto& inst : testgen::corpus(40, 1234)) {
    if (inst.kind != testgen::Kind::Singular) continue;
    const auto d = deflate_at_infinity(inst.sys);
    EXPECT_GE(d.steps.size(), 1u) << inst.label;
    EXPECT_LE(static_cast<Eigen::Index>(d.steps.size()), inst.sys.n()) << inst.label;
    EXPECT_LE(d.recomposition_distance, 1e-7) << inst.label;
  }
}

}  // namespace

// Randomized probes of two open statements. Outcomes are logged as test
// properties and on stdout; nothing here is asserted.
//
// 1. Without reachability: does a symmetric P satisfying the three P-side
//    certificate equations still force the function to be all-pass?
// 2. Does rank M(P) = m alone (without M(P) >= 0) describe the same set?

#include <gtest/gtest.h>

#include <iostream>

#include "allpass/lmi.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace allpass;

namespace {

void log(const std::string& key, const std::string& value) {
  ::testing::Test::RecordProperty(key, value);
  std::cout << "[probe] " << key << " = " << value << "\n";
}

TEST(Probe, PEquationsWithoutReachability) {
  testgen::Rng rng(4242);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int built = 0, completed = 0, counterexamples = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    // Reachable part plus a hidden reciprocal pair that B does not excite.
    const Eigen::Index n1 = 1 + trial % 3, m = 1 + trial % 2;
    const Matrix A1 = testgen::random_A(rng, n1, testgen::Kind::Unmixed).A;
    const double lambda = 1.5 + u(rng) * 0.4;
    Matrix A = Matrix::Zero(n1 + 2, n1 + 2);
    A.topLeftCorner(n1, n1) = A1;
    A(n1, n1) = lambda;
    A(n1 + 1, n1 + 1) = 1.0 / lambda;
    Matrix B = Matrix::Zero(n1 + 2, m);
    B.topRows(n1) = testgen::gaussian(rng, n1, m);
    const Matrix T = testgen::random_similarity(rng, n1 + 2);
    const Matrix Ti = T.inverse();
    A = T * A * Ti;
    B = T * B;
    const auto stein = solve_stein_sym(A, Matrix(B * B.transpose()), SteinForm::Direct);
    if (!stein.particular) continue;
    Matrix P = *stein.particular;
    for (const auto& H : stein.homogeneous_basis) P += u(rng) * (1.0 + norm2(P)) * H;
    P = symmetrize(P);
    if (P.jacobiSvd().singularValues().minCoeff() < 1e-6) continue;
    ++built;
    // Any (C, D) with the remaining two equations comes from a rank-m PSD
    // factor of W built on Q = P^{-1}.
    const Matrix Q = symmetrize(Matrix(P.inverse()));
    const Eigen::Index n = A.rows();
    Matrix W(n + m, n + m);
    W << A.transpose() * Q * A - Q, A.transpose() * Q * B, B.transpose() * Q * A,
        B.transpose() * Q * B + Matrix::Identity(m, m);
    Matrix F;
    try {
      F = psd_rank_factor(symmetrize(W), m);
    } catch (const Error&) {
      continue;
    }
    const StateSpace s(A, B, F.leftCols(n), F.rightCols(m));
    const auto r = certificate_residuals(s, P, Q);
    if (std::max({r.eq[0], r.eq[1], r.eq[2]}) > 1e-7 * (1 + P.norm())) continue;
    ++completed;
    const double defect = oracle::unitarity_defect(s);
    worst = std::max(worst, defect);
    if (defect > 1e-6 * std::pow(1 + s.B.norm() * s.C.norm() + s.D.norm(), 2)) ++counterexamples;
  }
  log("unreachable_instances", std::to_string(built));
  log("unreachable_completed", std::to_string(completed));
  log("unreachable_counterexamples", std::to_string(counterexamples));
  log("unreachable_worst_defect", std::to_string(worst));
  SUCCEED();
}

TEST(Probe, RankMButIndefinite) {
  testgen::Rng rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int rank_m = 0, indefinite = 0, sampled = 0;
  const auto corpus = testgen::corpus(40, 31);
  for (const auto& inst : corpus) {
    const auto& s = inst.sys;
    const Eigen::Index n = s.n(), m = s.m();
    const auto cert = certificate(s);
    std::vector<Matrix> candidates;
    // Pseudoinverse formula on non-invariant subspaces, scalings of P0, and
    // plain random symmetric matrices.
    for (int k = 0; k < 10; ++k) {
      const Eigen::Index d = 1 + static_cast<Eigen::Index>(u(rng) * static_cast<double>(n));
      const Subspace Y = Subspace::span(testgen::gaussian(rng, n, std::min(d, n)));
      const Matrix Im = Matrix::Identity(n, n) - Y.projector();
      candidates.push_back(symmetrize(pinv(Matrix(Im * cert.Q0 * Im))));
    }
    for (double t : {-2.0, -1.0, -0.5, 0.5, 2.0}) candidates.push_back(t * cert.P0);
    for (int k = 0; k < 10; ++k) {
      const Matrix G = testgen::gaussian(rng, n, n);
      candidates.push_back(0.5 * (G + G.transpose()));
    }
    for (const auto& P : candidates) {
      ++sampled;
      const Matrix M = M_of(P, s.A, s.C);
      const Vector ev = oracle::sym_eigenvalues(M);
      const double top = ev.cwiseAbs().maxCoeff();
      Eigen::Index rank = 0;
      for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (std::abs(ev(i)) > 1e-9 * std::max(1.0, top)) ++rank;
      if (rank != m) continue;
      ++rank_m;
      if (ev.minCoeff() < -1e-9 * std::max(1.0, top)) {
        ++indefinite;
        log("indefinite_example_" + std::to_string(indefinite), inst.label);
      }
    }
  }
  log("rank_probe_sampled", std::to_string(sampled));
  log("rank_probe_rank_m", std::to_string(rank_m));
  log("rank_probe_rank_m_indefinite", std::to_string(indefinite));
  SUCCEED();
}

}  // namespace

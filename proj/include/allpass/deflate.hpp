#ifndef ALLPASS_DEFLATE_HPP
#define ALLPASS_DEFLATE_HPP

// Factorization Q(z) = Q0(z) Qbar_1(z) ... Qbar_k(z) of an all-pass function
// singular at infinity: Q0(inf) is nonsingular and every Qbar_i is a pure
// delay on p_i channels, Qbar_i(z) = diag(I_{m-p_i}, z^{-1} I_{p_i}) U_i.

#include <limits>
#include <string>
#include <vector>

#include "allpass/allpass.hpp"

namespace allpass {

struct DeflationStep {
  Matrix U;             // orthogonal m x m
  Eigen::Index p = 0;   // number of delayed channels, 1 <= p <= m
};

struct SilvermanStep {
  bool done = false;
  StateSpace next;
  Matrix V;             // orthogonal column compression of D
  Eigen::Index q = 0;   // rank of D
};

namespace detail {

inline std::pair<double, double> extreme_singular_values(const Matrix& M) {
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& s = svd.singularValues();
  return {s(s.size() - 1), s(0)};
}

}  // namespace detail

/// One column-compression step. With D V = [D1 | 0] and B V = [B1 | B2]
/// (D1 full column rank q), the function Q(z) V diag(I_q, z I_{m-q}) has the
/// realization (A, [B1 | A B2], C, [D1 | C B2]).
inline SilvermanStep silverman_step(const StateSpace& sys, const Tolerances& tol = {}) {
  const Eigen::Index m = sys.m();
  SilvermanStep out;
  Eigen::JacobiSVD<Matrix> svd(sys.D, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cut = tol.scaled(s(0));
  Eigen::Index q = 0;
  while (q < m && s(q) > cut) ++q;
  if (q == m) {
    out.done = true;
    out.next = sys;
    out.V = Matrix::Identity(m, m);
    out.q = m;
    return out;
  }
  Matrix V = svd.matrixV();
  for (Eigen::Index j = 0; j < m; ++j) detail::fix_sign(V.col(j), 1e-12);
  const Matrix DV = sys.D * V;
  const Matrix BV = sys.B * V;
  Matrix B(sys.n(), m), D(m, m);
  B << BV.leftCols(q), sys.A * BV.rightCols(m - q);
  D << DV.leftCols(q), sys.C * BV.rightCols(m - q);
  out.next = StateSpace(sys.A, B, sys.C, D);
  out.V = V;
  out.q = q;
  return out;
}

/// Realization of diag(I_{m-p}, z^{-1} I_p) U with p states, all at the origin.
inline StateSpace qbar_realization(const DeflationStep& step, Eigen::Index m) {
  const Eigen::Index p = step.p;
  detail::require_dims(p >= 1 && p <= m, "qbar_realization: p out of range");
  detail::require_dims(step.U.rows() == m && step.U.cols() == m,
                       "qbar_realization: U must be m x m");
  Matrix sel_tail = Matrix::Zero(p, m);
  sel_tail.rightCols(p) = Matrix::Identity(p, p);
  Matrix C = Matrix::Zero(m, p);
  C.bottomRows(p) = Matrix::Identity(p, p);
  Matrix Dhead = Matrix::Zero(m, m);
  Dhead.topLeftCorner(m - p, m - p) = Matrix::Identity(m - p, m - p);
  return StateSpace(Matrix::Zero(p, p), sel_tail * step.U, C, Dhead * step.U);
}

struct Deflation {
  StateSpace q0;
  std::vector<DeflationStep> steps;
  /// Raw compression data in the order produced, (V_i, q_i).
  std::vector<Matrix> compressions;
  std::vector<Eigen::Index> ranks;
  std::vector<std::string> warnings;
  double recomposition_distance = 0.0;
  /// Recomposition distance under the other reading p_i = q_{k+1-i}
  /// (infinite when that reading gives an invalid p).
  double alternative_distance = std::numeric_limits<double>::infinity();

  /// Realization of q0 * Qbar_1 * ... * Qbar_k.
  StateSpace recompose() const {
    StateSpace acc = q0;
    for (const auto& s : steps) acc = series(acc, qbar_realization(s, q0.m()));
    return acc;
  }
};

/// Iterates silverman_step until D is nonsingular and converts the raw
/// (V_i, q_i) into delay factors with U_i = V_{k+1-i}^T and
/// p_i = m - q_{k+1-i}. The recomposition is verified on the grid.
inline Deflation deflate_at_infinity(const StateSpace& sys, const Tolerances& tol = {}) {
  const Eigen::Index m = sys.m();
  Deflation out;
  StateSpace cur = minimal_realization(sys, tol).first;
  const Eigen::Index n = cur.n();
  for (Eigen::Index iter = 0;; ++iter) {
    SilvermanStep st = silverman_step(cur, tol);
    if (st.done) break;
    if (iter >= n)
      throw PreconditionError("deflate_at_infinity: more than n = " + std::to_string(n) +
                              " compression steps; the function is not all-pass");
    out.compressions.push_back(st.V);
    out.ranks.push_back(st.q);
    cur = std::move(st.next);
  }
  const std::size_t k = out.compressions.size();
  for (std::size_t i = 0; i < k; ++i) {
    DeflationStep s;
    s.U = out.compressions[k - 1 - i].transpose();
    s.p = m - out.ranks[k - 1 - i];
    out.steps.push_back(std::move(s));
  }
  out.q0 = minimal_realization(cur, tol).first;
  auto [lo, hi] = detail::extreme_singular_values(out.q0.D);
  if (lo <= 10.0 * tol.scaled(hi))
    out.warnings.push_back("D of q0 is close to singular (smallest singular value " +
                           std::to_string(lo) + ")");
  out.recomposition_distance = transfer_distance(sys, out.recompose(), tol);
  // The other index reading, kept for the record.
  bool alt_valid = true;
  StateSpace alt = out.q0;
  for (std::size_t i = 0; i < k && alt_valid; ++i) {
    const Eigen::Index p = out.ranks[k - 1 - i];
    if (p < 1) {
      alt_valid = false;
      break;
    }
    alt = series(alt, qbar_realization({out.steps[i].U, p}, m));
  }
  if (alt_valid) out.alternative_distance = transfer_distance(sys, alt, tol);
  if (out.recomposition_distance > 1e3 * defect_threshold(sys, tol))
    throw NumericalError("deflate_at_infinity: recomposition differs from the input (" +
                         std::to_string(out.recomposition_distance) + ")");
  return out;
}

/// Reachable realization of sys_i(z) * Qbar(z) for a reachable sys_i.
inline StateSpace compose_step(const StateSpace& sys_i, const DeflationStep& step,
                               const Tolerances& tol = {}) {
  const Eigen::Index n = sys_i.n(), m = sys_i.m(), p = step.p;
  detail::require_dims(p >= 1 && p <= m && step.U.rows() == m && step.U.cols() == m,
                       "compose_step: invalid step");
  detail::require(reachability_subspace(sys_i.A, sys_i.B, tol).dim() == n,
                  "compose_step: realization is not reachable");
  const Matrix B1 = sys_i.B.leftCols(m - p), B2 = sys_i.B.rightCols(p);
  const Matrix D1 = sys_i.D.leftCols(m - p), D2 = sys_i.D.rightCols(p);

  Matrix A = Matrix::Zero(p + n, p + n);
  A.bottomLeftCorner(n, p) = B2;
  A.bottomRightCorner(n, n) = sys_i.A;
  Matrix Bpre = Matrix::Zero(p + n, m);
  Bpre.topRightCorner(p, p) = Matrix::Identity(p, p);
  Bpre.bottomLeftCorner(n, m - p) = B1;
  Matrix C(m, p + n);
  C << D2, sys_i.C;
  Matrix Dpre = Matrix::Zero(m, m);
  Dpre.leftCols(m - p) = D1;
  StateSpace out(A, Bpre * step.U, C, Dpre * step.U);
  if (reachability_subspace(out.A, out.B, tol).dim() != out.n())
    throw NumericalError("compose_step: composed realization lost reachability");
  return out;
}

}  // namespace allpass

#endif  // ALLPASS_DEFLATE_HPP

#ifndef ALLPASS_FACTOR_HPP
#define ALLPASS_FACTOR_HPP

// All-pass divisors from LMI solutions and minimal factorizations
// Q(z) = Q_L(z) Q_R(z) indexed by A-invariant subspaces.

#include <optional>
#include <string>
#include <vector>

#include "allpass/lmi.hpp"

namespace allpass {

enum class Side { Left, Right };

struct Divisor {
  Side side = Side::Left;
  /// Realization as constructed; may be non-minimal.
  StateSpace sys;
  StateSpace minimal_sys;
  Eigen::Index degree = 0;
  /// The LMI solution (P for left divisors, Q for right ones) and its kernel.
  Matrix source;
  Subspace source_kernel;
};

struct Factorization {
  Divisor left;
  Divisor right;
  /// Grid distance between the original function and left * right.
  double product_distance = 0.0;
};

namespace detail {

inline double product_threshold(const StateSpace& s, const Tolerances& tol) {
  return 1e3 * defect_threshold(s, tol);
}

inline Divisor finish_divisor(Side side, StateSpace raw, const Matrix& source,
                              const Subspace& kernel, const Tolerances& tol) {
  Divisor d;
  d.side = side;
  d.sys = std::move(raw);
  d.source = source;
  d.source_kernel = kernel;
  d.degree = source.rows() - kernel.dim();
  auto [minimal, rep] = minimal_realization(d.sys, tol);
  if (rep.mcmillan != d.degree)
    throw NumericalError("divisor: McMillan degree " + std::to_string(rep.mcmillan) +
                         " differs from the rank of the LMI solution " +
                         std::to_string(d.degree));
  d.minimal_sys = std::move(minimal);
  const double defect = allpass_defect(d.minimal_sys, tol.grid, tol).defect;
  if (defect > product_threshold(d.minimal_sys, tol))
    throw NumericalError("divisor: realization is not all-pass (defect " +
                         std::to_string(defect) + ")");
  return d;
}

}  // namespace detail

/// Q_L(z) = C (zI - A)^{-1} G + L from M(P) = [G; L][G^T L^T].
inline Divisor left_divisor(const StateSpace& sys, const LmiSolutionP& sol,
                            const Tolerances& tol = {}) {
  const auto diag = check_clmi_P(sol.P, sys.A, sys.C, tol);
  detail::require(diag.pass, "left_divisor: P fails the LMI check (" + diag.reason + ")");
  const Eigen::Index n = sys.n(), m = sys.m();
  const Matrix G = diag.factor->leftCols(n).transpose();
  const Matrix L = diag.factor->rightCols(m).transpose();
  return detail::finish_divisor(Side::Left, StateSpace(sys.A, G, sys.C, L), sol.P, sol.kernel,
                                tol);
}

/// Q_R(z) = H (zI - A)^{-1} B + J from N(Q) = [H J]^T [H J].
inline Divisor right_divisor(const StateSpace& sys, const LmiSolutionQ& sol,
                             const Tolerances& tol = {}) {
  const auto diag = check_clmi_Q(sol.Q, sys.A, sys.B, tol);
  detail::require(diag.pass, "right_divisor: Q fails the LMI check (" + diag.reason + ")");
  const Eigen::Index n = sys.n(), m = sys.m();
  const Matrix H = diag.factor->leftCols(n);
  const Matrix J = diag.factor->rightCols(m);
  return detail::finish_divisor(Side::Right, StateSpace(sys.A, sys.B, H, J), sol.Q, sol.kernel,
                                tol);
}

/// Minimal factorization sys = left * right with ker(right source) = X.
///
/// Works in a basis [Y-basis | X-basis] (Y = X-perp) followed by the
/// non-orthogonal change that block-diagonalizes Q0; there A is block lower
/// triangular with A_r on Y and A_l on X, the left divisor lives on X and the
/// cofactor is obtained from least-squares solves against [G_l; L].
inline Factorization factorize(const StateSpace& sys, const Subspace& X,
                               const std::optional<Certificate>& known = std::nullopt,
                               const Tolerances& tol = {}) {
  const Eigen::Index n = sys.n(), m = sys.m();
  detail::require_dims(X.ambient_dim() == n, "factorize: subspace has wrong ambient dimension");
  detail::require(X.is_invariant(sys.A, tol), "factorize: subspace is not A-invariant");
  const Certificate cert = known ? *known : certificate(sys, tol);
  const Subspace Y = X.complement();
  const auto solP = solution_from_subspace_P(cert.P0, Y, sys.A, sys.C, tol);
  const auto solQ = solution_from_subspace_Q(cert.Q0, X, sys.A, sys.B, tol);

  const Eigen::Index nl = X.dim(), nr = n - nl;
  Matrix T0(n, n);
  T0 << Y.basis(), X.basis();
  const Matrix Ab = T0.transpose() * sys.A * T0;
  const Matrix Bb = T0.transpose() * sys.B;
  const Matrix Cb = sys.C * T0;
  const Matrix Q0b = symmetrize(T0.transpose() * cert.Q0 * T0);

  const Matrix Q12 = Q0b.topRightCorner(nr, nl);
  const Matrix Q22 = Q0b.bottomRightCorner(nl, nl);
  const Matrix Q22inv = nl > 0 ? Matrix(Q22.inverse()) : Matrix(0, 0);
  const Matrix K = Q22inv * Q12.transpose();  // nl x nr

  const Matrix Ar = Ab.topLeftCorner(nr, nr);
  const Matrix Al = Ab.bottomRightCorner(nl, nl);
  const Matrix A21 = Ab.bottomLeftCorner(nl, nr) + K * Ar - Al * K;
  const Matrix B1 = Bb.topRows(nr);
  const Matrix B2 = Bb.bottomRows(nl) + K * B1;
  const Matrix C2 = Cb.rightCols(nl);
  const Matrix C1 = Cb.leftCols(nr) - C2 * K;

  // Left divisor on X.
  const Matrix Pl = symmetrize(Q22inv);
  const Matrix F = psd_rank_factor(M_of(Pl, Al, C2), m, tol);
  const Matrix Gl = F.leftCols(nl).transpose();
  const Matrix L = F.rightCols(m).transpose();

  // Same gauge expressed in the original coordinates, x = T0 T x_new.
  Matrix T = Matrix::Identity(n, n);
  T.bottomLeftCorner(nl, nr) = -K;
  Matrix Gnew = Matrix::Zero(n, m);
  Gnew.bottomRows(nl) = Gl;
  const Matrix G = T0 * T * Gnew;

  // Cofactor: [B2; D] = [Gl; L] D_r and [A21; C1] = [Gl; L] C_r.
  Matrix S(nl + m, m);
  S << Gl, L;
  Matrix rhs_d(nl + m, m), rhs_c(nl + m, nr);
  rhs_d << B2, sys.D;
  rhs_c << A21, C1;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(S);
  const Matrix Dr = cod.solve(rhs_d);
  const Matrix Cr = nr > 0 ? Matrix(cod.solve(rhs_c)) : Matrix(m, 0);
  const double fit = std::max((S * Dr - rhs_d).norm(), nr > 0 ? (S * Cr - rhs_c).norm() : 0.0);
  if (fit > tol.scaled(rhs_d.norm() + rhs_c.norm()) * 1e3)
    throw NumericalError("factorize: cofactor equations are not solvable (residual " +
                         std::to_string(fit) + ")");

  Factorization out;
  out.left = detail::finish_divisor(Side::Left, StateSpace(sys.A, G, sys.C, L), solP.P,
                                    solP.kernel, tol);
  out.right = detail::finish_divisor(Side::Right, StateSpace(Ar, B1, Cr, Dr), solQ.Q,
                                     solQ.kernel, tol);
  if (out.left.degree + out.right.degree != degree_report(sys, tol).mcmillan)
    throw NumericalError("factorize: degrees of the divisors do not add up");
  out.product_distance =
      transfer_distance(sys, series(out.left.minimal_sys, out.right.minimal_sys), tol);
  if (out.product_distance > detail::product_threshold(sys, tol))
    throw NumericalError("factorize: left * right differs from the original function (" +
                         std::to_string(out.product_distance) + ")");
  return out;
}

/// ker(left source) equals the orthogonal complement of ker(right source).
inline bool complementary_pair_check(const Factorization& f, double subspace_tol = 1e-6) {
  const Subspace& ker_p = f.left.source_kernel;
  const Subspace& ker_q = f.right.source_kernel;
  if (ker_p.ambient_dim() != ker_q.ambient_dim()) return false;
  if (ker_p.dim() + ker_q.dim() != ker_p.ambient_dim()) return false;
  return ker_p.distance(ker_q.complement()) <= subspace_tol;
}

namespace detail {

inline void require_biproper(const StateSpace& sys, const Tolerances& tol) {
  auto smallest = [](const Matrix& M) {
    Eigen::JacobiSVD<Matrix> svd(M);
    const auto& s = svd.singularValues();
    return std::pair{s(s.size() - 1), s(0)};
  };
  if (sys.n() > 0) {
    auto [lo, hi] = smallest(sys.A);
    detail::require(lo > tol.scaled(hi), "biproper divisor: A is singular");
  }
  auto [lo, hi] = smallest(sys.D);
  detail::require(lo > tol.scaled(hi), "biproper divisor: D is singular");
}

}  // namespace detail

/// Closed-form left divisor: L = (I + C P C^T)^{1/2}, G = A P C^T L^{-T}.
inline Divisor biproper_left_divisor(const StateSpace& sys, const Matrix& P,
                                     const Tolerances& tol = {}) {
  detail::require_biproper(sys, tol);
  const Eigen::Index m = sys.m();
  const Matrix Ps = symmetrize(P);
  const Matrix L = sqrtm_spd(Matrix(Matrix::Identity(m, m) + sys.C * Ps * sys.C.transpose()), tol);
  const Matrix G = sys.A * Ps * sys.C.transpose() * L.transpose().inverse();
  return detail::finish_divisor(Side::Left, StateSpace(sys.A, G, sys.C, L), Ps,
                                detail::symmetric_kernel(Ps, tol), tol);
}

/// Closed-form right divisor: J = (I + B^T Q B)^{1/2}, H = J^{-T} B^T Q A.
inline Divisor biproper_right_divisor(const StateSpace& sys, const Matrix& Q,
                                      const Tolerances& tol = {}) {
  detail::require_biproper(sys, tol);
  const Eigen::Index m = sys.m();
  const Matrix Qs = symmetrize(Q);
  const Matrix J = sqrtm_spd(Matrix(Matrix::Identity(m, m) + sys.B.transpose() * Qs * sys.B), tol);
  const Matrix H = J.transpose().inverse() * sys.B.transpose() * Qs * sys.A;
  return detail::finish_divisor(Side::Right, StateSpace(sys.A, sys.B, H, J), Qs,
                                detail::symmetric_kernel(Qs, tol), tol);
}

/// One factorization per enumerated A-invariant subspace, dropping those
/// whose left divisor matches an earlier one up to a right orthogonal factor.
inline std::vector<Factorization> enumerate_divisors(const StateSpace& sys, std::size_t max_count,
                                                     const Tolerances& tol = {},
                                                     double dedup_distance = 1e-6) {
  const Certificate cert = certificate(sys, tol);
  std::vector<Factorization> out;
  for (const auto& X : invariant_subspaces(sys.A, max_count, tol)) {
    Factorization f = factorize(sys, X, cert, tol);
    bool duplicate = false;
    for (const auto& prev : out) {
      if (prev.left.degree != f.left.degree) continue;
      if (aligned_distance(prev.left.minimal_sys, f.left.minimal_sys, GaugeSide::Right, tol)
              .distance <= dedup_distance) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) out.push_back(std::move(f));
  }
  return out;
}

}  // namespace allpass

#endif  // ALLPASS_FACTOR_HPP

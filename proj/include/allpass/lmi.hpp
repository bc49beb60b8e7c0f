#ifndef ALLPASS_LMI_HPP
#define ALLPASS_LMI_HPP

// Rank-constrained LMIs
//   M(P) >= 0, rank M(P) = m      M(P) = [A P A^T - P, A P C^T; C P A^T, C P C^T + I]
//   N(Q) >= 0, rank N(Q) = m      N(Q) = [A^T Q A - Q, A^T Q B; B^T Q A, B^T Q B + I]
// their invariant-subspace parametrization and the homogeneous Riccati
// equations they reduce to when A is nonsingular.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "allpass/allpass.hpp"

namespace allpass {

inline Matrix M_of(const Matrix& P, const Matrix& A, const Matrix& C) {
  const Eigen::Index n = A.rows(), m = C.rows();
  detail::require_dims(A.cols() == n && C.cols() == n && P.rows() == n && P.cols() == n,
                       "M_of: incompatible dimensions");
  Matrix M(n + m, n + m);
  M << A * P * A.transpose() - P, A * P * C.transpose(), C * P * A.transpose(),
      C * P * C.transpose() + Matrix::Identity(m, m);
  return symmetrize(M);
}

inline Matrix N_of(const Matrix& Q, const Matrix& A, const Matrix& B) {
  const Eigen::Index n = A.rows(), m = B.cols();
  detail::require_dims(A.cols() == n && B.rows() == n && Q.rows() == n && Q.cols() == n,
                       "N_of: incompatible dimensions");
  Matrix N(n + m, n + m);
  N << A.transpose() * Q * A - Q, A.transpose() * Q * B, B.transpose() * Q * A,
      B.transpose() * Q * B + Matrix::Identity(m, m);
  return symmetrize(N);
}

/// Solution P of the P-side LMI with its kernel and factor
/// M(P) = [G; L] [G^T L^T].
struct LmiSolutionP {
  Matrix P;
  Subspace kernel;
  Matrix G;  // n x m
  Matrix L;  // m x m
};

/// Solution Q of the Q-side LMI with its kernel and factor
/// N(Q) = [H J]^T [H J].
struct LmiSolutionQ {
  Matrix Q;
  Subspace kernel;
  Matrix H;  // m x n
  Matrix J;  // m x m
};

struct ClmiDiagnostics {
  bool pass = false;
  Vector eigenvalues;  // descending
  double min_eigenvalue = 0.0;
  int rank = 0;
  /// Full-row-rank factor F (m x (n+m)) with F^T F equal to the LMI matrix.
  std::optional<Matrix> factor;
  std::string reason;
};

namespace detail {

inline ClmiDiagnostics check_psd_rank(const Matrix& W, Eigen::Index m, const Tolerances& tol) {
  ClmiDiagnostics d;
  Eigen::SelfAdjointEigenSolver<Matrix> es(W, Eigen::EigenvaluesOnly);
  d.eigenvalues = es.eigenvalues().reverse();
  const Eigen::Index k = d.eigenvalues.size();
  const double top = std::max(std::abs(d.eigenvalues(0)), std::abs(d.eigenvalues(k - 1)));
  const double cut = tol.scaled(top);
  d.min_eigenvalue = d.eigenvalues(k - 1);
  for (Eigen::Index i = 0; i < k; ++i)
    if (d.eigenvalues(i) > cut) ++d.rank;
  if (d.min_eigenvalue < -cut) {
    d.reason = "matrix is indefinite";
    return d;
  }
  if (d.rank != m) {
    d.reason = "rank " + std::to_string(d.rank) + " differs from m = " + std::to_string(m);
    return d;
  }
  d.factor = psd_rank_factor(W, m, tol);
  d.pass = true;
  return d;
}

/// ker(S) for symmetric S via its eigen-decomposition.
inline Subspace symmetric_kernel(const Matrix& S, const Tolerances& tol) {
  const Eigen::Index n = S.rows();
  if (n == 0) return Subspace::zero(0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S));
  const Vector& ev = es.eigenvalues();
  const double cut = tol.scaled(std::max(std::abs(ev(0)), std::abs(ev(n - 1))));
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(ev(i)) <= cut) idx.push_back(i);
  Matrix basis(n, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) basis.col(k) = es.eigenvectors().col(idx[k]);
  return Subspace(basis);
}

}  // namespace detail

/// PSD and rank-m test of M(P); populates the factor on success.
inline ClmiDiagnostics check_clmi_P(const Matrix& P, const Matrix& A, const Matrix& C,
                                    const Tolerances& tol = {}) {
  return detail::check_psd_rank(M_of(P, A, C), C.rows(), tol);
}

inline ClmiDiagnostics check_clmi_Q(const Matrix& Q, const Matrix& A, const Matrix& B,
                                    const Tolerances& tol = {}) {
  return detail::check_psd_rank(N_of(Q, A, B), B.cols(), tol);
}

/// Re-validates a stored solution against (A, C).
inline ClmiDiagnostics check_clmi(const LmiSolutionP& s, const Matrix& A, const Matrix& C,
                                  const Tolerances& tol = {}) {
  return check_clmi_P(s.P, A, C, tol);
}

inline ClmiDiagnostics check_clmi(const LmiSolutionQ& s, const Matrix& A, const Matrix& B,
                                  const Tolerances& tol = {}) {
  return check_clmi_Q(s.Q, A, B, tol);
}

/// Builds an LmiSolutionP from a candidate P; throws if the LMI fails.
inline LmiSolutionP make_solution_P(const Matrix& P, const Matrix& A, const Matrix& C,
                                    const Tolerances& tol = {}) {
  const Matrix Ps = symmetrize(P);
  auto diag = check_clmi_P(Ps, A, C, tol);
  detail::require(diag.pass, "P is not a solution of the rank-constrained LMI: " + diag.reason);
  const Eigen::Index n = A.rows();
  LmiSolutionP s;
  s.P = Ps;
  s.kernel = detail::symmetric_kernel(Ps, tol);
  s.G = diag.factor->leftCols(n).transpose();
  s.L = diag.factor->rightCols(C.rows()).transpose();
  return s;
}

inline LmiSolutionQ make_solution_Q(const Matrix& Q, const Matrix& A, const Matrix& B,
                                    const Tolerances& tol = {}) {
  const Matrix Qs = symmetrize(Q);
  auto diag = check_clmi_Q(Qs, A, B, tol);
  detail::require(diag.pass, "Q is not a solution of the rank-constrained LMI: " + diag.reason);
  const Eigen::Index n = A.rows();
  LmiSolutionQ s;
  s.Q = Qs;
  s.kernel = detail::symmetric_kernel(Qs, tol);
  s.H = diag.factor->leftCols(n);
  s.J = diag.factor->rightCols(B.cols());
  return s;
}

/// Homogeneous Stein solution spaces:
///   basis_p spans { D = D^T : A^T D A - D = 0 },
///   basis_q spans { D = D^T : A D A^T - D = 0 }.
struct DeltaSpace {
  std::vector<Matrix> basis_p;
  std::vector<Matrix> basis_q;
};

inline DeltaSpace delta_space(const Matrix& A, const Tolerances& tol = {}) {
  const Eigen::Index n = A.rows();
  const Matrix zero = Matrix::Zero(n, n);
  DeltaSpace ds;
  ds.basis_p = solve_stein_sym(A, zero, SteinForm::Transposed, tol).homogeneous_basis;
  ds.basis_q = solve_stein_sym(A, zero, SteinForm::Direct, tol).homogeneous_basis;
  return ds;
}

/// P_Delta = (P0^{-1} + Delta)^{-1} for Delta with A^T Delta A = Delta.
inline LmiSolutionP nonsingular_family_member(const StateSpace& sys, const Certificate& cert,
                                              const Matrix& delta, const Tolerances& tol = {}) {
  const Eigen::Index n = sys.n();
  detail::require_dims(delta.rows() == n && delta.cols() == n,
                       "nonsingular_family_member: delta has wrong shape");
  detail::require_dims(is_symmetric(delta, tol.scaled(delta.norm())),
                       "nonsingular_family_member: delta must be symmetric");
  const double hom = (sys.A.transpose() * delta * sys.A - delta).norm();
  detail::require(hom <= tol.scaled(norm2(sys.A) * norm2(sys.A) * delta.norm()),
                  "nonsingular_family_member: delta does not solve A^T D A - D = 0");
  if (n == 0) return make_solution_P(Matrix(0, 0), sys.A, sys.C, tol);
  const Matrix inner = symmetrize(cert.Q0 + delta);
  Eigen::JacobiSVD<Matrix> svd(inner);
  const auto& s = svd.singularValues();
  detail::require(s(n - 1) > tol.scaled(s(0)) * 1e3,
                  "nonsingular_family_member: P0^{-1} + delta is singular");
  auto sol = make_solution_P(Matrix(inner.inverse()), sys.A, sys.C, tol);
  detail::require(sol.kernel.dim() == 0,
                  "nonsingular_family_member: P_delta is not of full rank");
  return sol;
}

/// Q_Delta = (Q0^{-1} + Delta)^{-1} for Delta with A Delta A^T = Delta.
inline LmiSolutionQ nonsingular_family_member_Q(const StateSpace& sys, const Certificate& cert,
                                                const Matrix& delta, const Tolerances& tol = {}) {
  const Eigen::Index n = sys.n();
  detail::require_dims(delta.rows() == n && delta.cols() == n,
                       "nonsingular_family_member_Q: delta has wrong shape");
  detail::require_dims(is_symmetric(delta, tol.scaled(delta.norm())),
                       "nonsingular_family_member_Q: delta must be symmetric");
  const double hom = (sys.A * delta * sys.A.transpose() - delta).norm();
  detail::require(hom <= tol.scaled(norm2(sys.A) * norm2(sys.A) * delta.norm()),
                  "nonsingular_family_member_Q: delta does not solve A D A^T - D = 0");
  if (n == 0) return make_solution_Q(Matrix(0, 0), sys.A, sys.B, tol);
  const Matrix inner = symmetrize(cert.P0 + delta);
  Eigen::JacobiSVD<Matrix> svd(inner);
  const auto& s = svd.singularValues();
  detail::require(s(n - 1) > tol.scaled(s(0)) * 1e3,
                  "nonsingular_family_member_Q: Q0^{-1} + delta is singular");
  auto sol = make_solution_Q(Matrix(inner.inverse()), sys.A, sys.B, tol);
  detail::require(sol.kernel.dim() == 0,
                  "nonsingular_family_member_Q: Q_delta is not of full rank");
  return sol;
}

namespace detail {

// Largest eigenvalue of a symmetric LMI matrix beyond its top m, relative to
// the top one: how far the matrix is from rank m.
inline double rank_m_defect(const Matrix& M, Eigen::Index m) {
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(symmetrize(M)).eigenvalues();
  const Eigen::Index k = ev.size();
  if (k == 0) return 0.0;
  const double top = std::max(1.0, ev.cwiseAbs().maxCoeff());
  double tail = 0.0;
  for (Eigen::Index i = 0; i < k - m; ++i) tail = std::max(tail, std::abs(ev(i)));
  return tail / top;
}

// [(I - Pi) R^{-1} (I - Pi)]^+ with Pi the projector onto sub. Equivalently
// R - R K (K^T R K)^{-1} K^T R for an orthonormal basis K of sub; the two
// forms invert different blocks and lose accuracy in different places, so
// both are formed and the one whose LMI matrix is closer to rank m is kept.
template <class Lmi>
inline Matrix subspace_formula(const Matrix& R, const Subspace& sub, Eigen::Index m, Lmi lmi,
                               const Tolerances& tol) {
  const Eigen::Index n = R.rows();
  const Matrix I_minus = Matrix::Identity(n, n) - sub.projector();
  const Matrix via_pinv = symmetrize(pinv(Matrix(I_minus * Matrix(R.inverse()) * I_minus), tol));
  if (sub.dim() == 0 || sub.dim() == n) return via_pinv;
  const Matrix K = sub.basis();
  const Matrix RK = R * K;
  Eigen::FullPivLU<Matrix> lu(Matrix(K.transpose() * RK));
  if (!lu.isInvertible()) return via_pinv;
  const Matrix via_schur =
      symmetrize(Matrix(I_minus * (R - RK * lu.solve(Matrix(RK.transpose()))) * I_minus));
  return rank_m_defect(lmi(via_schur), m) < rank_m_defect(lmi(via_pinv), m) ? via_schur
                                                                            : via_pinv;
}

}  // namespace detail

/// P = [(I - Pi) P_ns^{-1} (I - Pi)]^+ for an A^T-invariant Y with projector
/// Pi. ker P = Y.
inline LmiSolutionP solution_from_subspace_P(const Matrix& P_ns, const Subspace& Y,
                                             const Matrix& A, const Matrix& C,
                                             const Tolerances& tol = {}) {
  const Eigen::Index n = A.rows();
  detail::require_dims(P_ns.rows() == n && P_ns.cols() == n && Y.ambient_dim() == n,
                       "solution_from_subspace_P: incompatible dimensions");
  detail::require(Y.is_invariant(A.transpose(), tol),
                  "solution_from_subspace_P: subspace is not A^T-invariant");
  if (n == 0) return make_solution_P(Matrix(0, 0), A, C, tol);
  auto sol = make_solution_P(
      detail::subspace_formula(P_ns, Y, C.rows(), [&](const Matrix& P) { return M_of(P, A, C); },
                               tol),
      A, C, tol);
  detail::require(sol.kernel.dim() == Y.dim() && sol.kernel.distance(Y) <= 1e-6,
                  "solution_from_subspace_P: kernel differs from the subspace");
  sol.kernel = Y;
  return sol;
}

/// Q = [(I - Pi) Q_ns^{-1} (I - Pi)]^+ for an A-invariant X. ker Q = X.
inline LmiSolutionQ solution_from_subspace_Q(const Matrix& Q_ns, const Subspace& X,
                                             const Matrix& A, const Matrix& B,
                                             const Tolerances& tol = {}) {
  const Eigen::Index n = A.rows();
  detail::require_dims(Q_ns.rows() == n && Q_ns.cols() == n && X.ambient_dim() == n,
                       "solution_from_subspace_Q: incompatible dimensions");
  detail::require(X.is_invariant(A, tol),
                  "solution_from_subspace_Q: subspace is not A-invariant");
  if (n == 0) return make_solution_Q(Matrix(0, 0), A, B, tol);
  auto sol = make_solution_Q(
      detail::subspace_formula(Q_ns, X, B.cols(), [&](const Matrix& Q) { return N_of(Q, A, B); },
                               tol),
      A, B, tol);
  detail::require(sol.kernel.dim() == X.dim() && sol.kernel.distance(X) <= 1e-6,
                  "solution_from_subspace_Q: kernel differs from the subspace");
  sol.kernel = X;
  return sol;
}

/// The Q-side solution complementary to a member of the P0 family: built
/// over Q0 from the orthogonal complement of ker P. rank P + rank Q = n.
inline LmiSolutionQ complementary(const LmiSolutionP& sol, const StateSpace& sys,
                                  const Certificate& cert, const Tolerances& tol = {}) {
  const Eigen::Index n = sys.n();
  const auto rebuilt = solution_from_subspace_P(cert.P0, sol.kernel, sys.A, sys.C, tol);
  detail::require((rebuilt.P - sol.P).norm() <= tol.scaled(norm2(sol.P)) * 1e3,
                  "complementary: solution does not belong to the P0 family");
  auto q = solution_from_subspace_Q(cert.Q0, sol.kernel.complement(), sys.A, sys.B, tol);
  const Eigen::Index rank_p = n - sol.kernel.dim();
  const Eigen::Index rank_q = n - q.kernel.dim();
  if (rank_p + rank_q != n)
    throw NumericalError("complementary: rank P + rank Q differs from n");
  return q;
}

/// Members of the P0 (resp. Q0) family, one per enumerated invariant subspace.
inline std::vector<LmiSolutionP> enumerate_family_P(const StateSpace& sys, const Matrix& P_ns,
                                                    std::size_t max_count,
                                                    const Tolerances& tol = {}) {
  std::vector<LmiSolutionP> out;
  for (const auto& Y : invariant_subspaces(sys.A.transpose(), max_count, tol))
    out.push_back(solution_from_subspace_P(P_ns, Y, sys.A, sys.C, tol));
  return out;
}

inline std::vector<LmiSolutionQ> enumerate_family_Q(const StateSpace& sys, const Matrix& Q_ns,
                                                    std::size_t max_count,
                                                    const Tolerances& tol = {}) {
  std::vector<LmiSolutionQ> out;
  for (const auto& X : invariant_subspaces(sys.A, max_count, tol))
    out.push_back(solution_from_subspace_Q(Q_ns, X, sys.A, sys.B, tol));
  return out;
}

/// || A P A^T - A P C^T (I + C P C^T)^{-1} C P A^T - P ||. Throws
/// PreconditionError when I + C P C^T is singular.
inline double riccati_residual_P(const Matrix& P, const Matrix& A, const Matrix& C,
                                 const Tolerances& tol = {}) {
  const Eigen::Index n = A.rows(), m = C.rows();
  detail::require_dims(P.rows() == n && P.cols() == n && C.cols() == n,
                       "riccati_residual_P: incompatible dimensions");
  const Matrix mid = Matrix::Identity(m, m) + C * P * C.transpose();
  Eigen::JacobiSVD<Matrix> svd(mid, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  detail::require(s(m - 1) > tol.scaled(s(0)), "riccati_residual_P: I + C P C^T is singular");
  const Matrix APCt = A * P * C.transpose();
  const Matrix R =
      A * P * A.transpose() - APCt * svd.solve(Matrix(APCt.transpose())) - P;
  return R.norm();
}

inline double riccati_residual_Q(const Matrix& Q, const Matrix& A, const Matrix& B,
                                 const Tolerances& tol = {}) {
  const Eigen::Index n = A.rows(), m = B.cols();
  detail::require_dims(Q.rows() == n && Q.cols() == n && B.rows() == n,
                       "riccati_residual_Q: incompatible dimensions");
  const Matrix mid = Matrix::Identity(m, m) + B.transpose() * Q * B;
  Eigen::JacobiSVD<Matrix> svd(mid, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  detail::require(s(m - 1) > tol.scaled(s(0)), "riccati_residual_Q: I + B^T Q B is singular");
  const Matrix AtQB = A.transpose() * Q * B;
  const Matrix R =
      A.transpose() * Q * A - AtQB * svd.solve(Matrix(AtQB.transpose())) - Q;
  return R.norm();
}

}  // namespace allpass

#endif  // ALLPASS_LMI_HPP

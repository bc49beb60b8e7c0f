#ifndef ALLPASS_ALLPASS_HPP
#define ALLPASS_ALLPASS_HPP

// Certificates of the all-pass property, the all-pass test, and completion of
// partial data (A,B), (A,C), (A,B,C) to all-pass quadruples.

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "allpass/realization.hpp"

namespace allpass {

/// The symmetric pair (P0, Q0) with
///   A P0 A^T - P0 = B B^T,  B D^T = A P0 C^T,  D D^T - C P0 C^T = I,
///   A^T Q0 A - Q0 = C^T C,  C^T D = A^T Q0 B,  D^T D - B^T Q0 B = I,
/// and P0 Q0 = I.
struct Certificate {
  Matrix P0;
  Matrix Q0;
};

/// Norms of the six defining equations, P-side first.
struct CertificateResiduals {
  std::array<double, 6> eq{};
  double max() const { return *std::max_element(eq.begin(), eq.end()); }
};

inline CertificateResiduals certificate_residuals(const StateSpace& s, const Matrix& P,
                                                  const Matrix& Q) {
  const Eigen::Index m = s.m();
  const Matrix I = Matrix::Identity(m, m);
  const Matrix& A = s.A;
  const Matrix& B = s.B;
  const Matrix& C = s.C;
  const Matrix& D = s.D;
  CertificateResiduals r;
  r.eq[0] = (A * P * A.transpose() - P - B * B.transpose()).norm();
  r.eq[1] = (B * D.transpose() - A * P * C.transpose()).norm();
  r.eq[2] = (D * D.transpose() - C * P * C.transpose() - I).norm();
  r.eq[3] = (A.transpose() * Q * A - Q - C.transpose() * C).norm();
  r.eq[4] = (C.transpose() * D - A.transpose() * Q * B).norm();
  r.eq[5] = (D.transpose() * D - B.transpose() * Q * B - I).norm();
  return r;
}

/// || F X F^T - X || with F = [A B; C D] and X = diag(P, -I).
inline double f_identity_defect(const StateSpace& s, const Matrix& P) {
  const Eigen::Index n = s.n(), m = s.m();
  Matrix F(n + m, n + m);
  F << s.A, s.B, s.C, s.D;
  Matrix X = Matrix::Zero(n + m, n + m);
  X.topLeftCorner(n, n) = P;
  X.bottomRightCorner(m, m) = -Matrix::Identity(m, m);
  return (F * X * F.transpose() - X).norm();
}

namespace detail {

/// One block equation  map(X) = rhs  in the symmetric unknown X.
struct SymBlock {
  Matrix op;
  Vector rhs;
};

template <class Map>
SymBlock sym_block(Eigen::Index n, Map&& map, const Matrix& rhs) {
  SymBlock b;
  b.op = symmetric_operator(n, std::forward<Map>(map));
  b.rhs = Eigen::Map<const Vector>(rhs.data(), rhs.size());
  return b;
}

/// Least-squares solve of the stacked blocks (in the given order). Returns
/// the symmetric solution and whether the stacked operator has full column
/// rank.
inline std::pair<Matrix, bool> solve_stacked(Eigen::Index n, const std::vector<SymBlock>& blocks,
                                             const Tolerances& tol) {
  Eigen::Index rows = 0;
  for (const auto& b : blocks) rows += b.op.rows();
  const Eigen::Index cols = sym_count(n);
  Matrix op(rows, cols);
  Vector rhs(rows);
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    op.middleRows(r, b.op.rows()) = b.op;
    rhs.segment(r, b.rhs.size()) = b.rhs;
    r += b.op.rows();
  }
  auto ls = least_squares(op, rhs, tol);
  return {from_sym_coords(ls.solution, n), ls.nullspace.cols() == 0};
}

/// The three P-side blocks of the certificate equations.
inline std::vector<SymBlock> p_blocks(const StateSpace& s) {
  const Eigen::Index n = s.n(), m = s.m();
  const Matrix At = s.A.transpose(), Ct = s.C.transpose();
  std::vector<SymBlock> blocks;
  blocks.push_back(sym_block(
      n, [&](const Matrix& X) -> Matrix { return s.A * X * At - X; }, s.B * s.B.transpose()));
  blocks.push_back(sym_block(
      n, [&](const Matrix& X) -> Matrix { return s.A * X * Ct; }, s.B * s.D.transpose()));
  blocks.push_back(sym_block(
      n, [&](const Matrix& X) -> Matrix { return s.C * X * Ct; },
      s.D * s.D.transpose() - Matrix::Identity(m, m)));
  return blocks;
}

inline std::vector<SymBlock> q_blocks(const StateSpace& s) {
  const Eigen::Index n = s.n(), m = s.m();
  const Matrix At = s.A.transpose(), Bt = s.B.transpose();
  std::vector<SymBlock> blocks;
  blocks.push_back(sym_block(
      n, [&](const Matrix& X) -> Matrix { return At * X * s.A - X; }, s.C.transpose() * s.C));
  blocks.push_back(sym_block(
      n, [&](const Matrix& X) -> Matrix { return At * X * s.B; }, s.C.transpose() * s.D));
  blocks.push_back(sym_block(
      n, [&](const Matrix& X) -> Matrix { return Bt * X * s.B; },
      s.D.transpose() * s.D - Matrix::Identity(m, m)));
  return blocks;
}

/// Scale against which certificate residuals are judged.
inline double certificate_scale(const StateSpace& s, const Matrix& P, const Matrix& Q) {
  const double a = norm2(s.A), b = norm2(s.B), c = norm2(s.C), d = norm2(s.D);
  const double p = norm2(P), q = norm2(Q);
  return std::max({a * a * p, a * a * q, b * b, c * c, d * d, (1.0 + a) * (b + c) * (p + q)});
}

}  // namespace detail

/// The unique certificate of a minimal all-pass realization.
///
/// Each triple of equations is solved as one stacked least-squares problem in
/// the symmetric unknown. Throws PreconditionError for non-minimal input and
/// when the residuals show the realization is not all-pass.
inline Certificate certificate(const StateSpace& sys, const Tolerances& tol = {}) {
  detail::require(is_minimal(sys, tol), "certificate: realization is not minimal");
  const Eigen::Index n = sys.n();
  Certificate cert;
  if (n == 0) {
    cert.P0 = Matrix(0, 0);
    cert.Q0 = Matrix(0, 0);
  } else {
    auto [P, p_unique] = detail::solve_stacked(n, detail::p_blocks(sys), tol);
    auto [Q, q_unique] = detail::solve_stacked(n, detail::q_blocks(sys), tol);
    detail::require(p_unique && q_unique, "certificate: certificate equations are degenerate");
    cert.P0 = std::move(P);
    cert.Q0 = std::move(Q);
  }
  const auto res = certificate_residuals(sys, cert.P0, cert.Q0);
  const double scale = detail::certificate_scale(sys, cert.P0, cert.Q0);
  detail::require(res.max() <= tol.scaled(scale),
                  "certificate: equations not satisfied (residual " + std::to_string(res.max()) +
                      "); realization is not all-pass");
  if (n > 0) {
    const double inv = (cert.P0 * cert.Q0 - Matrix::Identity(n, n)).norm();
    detail::require(inv <= tol.scaled(norm2(cert.P0) * norm2(cert.Q0)),
                    "certificate: P0 Q0 differs from the identity");
  }
  return cert;
}

struct AllPassVerdict {
  bool is_allpass = false;
  std::optional<Certificate> certificate;
  /// Minimal realization the certificate refers to.
  StateSpace minimal;
  DegreeReport degree;
  double defect = 0.0;
  int skipped_grid_points = 0;
  CertificateResiduals residuals;
  std::string reason;
};

/// Acceptance threshold for the unit-circle defect of a realization.
inline double defect_threshold(const StateSpace& s, const Tolerances& tol) {
  const double b = norm2(s.B), c = norm2(s.C), d = norm2(s.D);
  return tol.scaled((b * c + d) * (b * c + d));
}

/// Reduces to a minimal realization, attempts the certificate and
/// cross-checks it against the unit-circle grid. Failures are encoded in the
/// verdict.
inline AllPassVerdict is_allpass(const StateSpace& sys, const Tolerances& tol = {}) {
  AllPassVerdict v;
  auto [minimal, rep] = minimal_realization(sys, tol);
  v.minimal = minimal;
  v.degree = rep;
  const auto gd = allpass_defect(sys, tol.grid, tol);
  v.defect = gd.defect;
  v.skipped_grid_points = gd.skipped;
  try {
    v.certificate = certificate(minimal, tol);
    v.residuals = certificate_residuals(minimal, v.certificate->P0, v.certificate->Q0);
  } catch (const PreconditionError& e) {
    v.reason = e.what();
  }
  const bool grid_ok = v.defect <= defect_threshold(sys, tol);
  if (!grid_ok && v.reason.empty()) v.reason = "unit-circle defect above tolerance";
  v.is_allpass = v.certificate.has_value() && grid_ok;
  return v;
}

/// Output of a completion: the missing matrices.
struct Completion {
  Matrix first;   // C for from_B, B for from_C
  Matrix D;
};

/// Given a reachable (A, B) and a solution P of A P A^T - P = B B^T, builds
/// (C, D) making (A, B, C, D) a minimal all-pass realization with certificate
/// P. The left orthogonal gauge is fixed by D = D^T >= 0.
inline Completion complete_from_B(const Matrix& A, const Matrix& B, const Matrix& P,
                                  const Tolerances& tol = {}) {
  const Eigen::Index n = A.rows(), m = B.cols();
  detail::require_dims(A.cols() == n && B.rows() == n && P.rows() == n && P.cols() == n && m >= 1,
                       "complete_from_B: incompatible dimensions");
  detail::require_dims(is_symmetric(P, tol.scaled(P.norm())), "complete_from_B: P not symmetric");
  detail::require(reachability_subspace(A, B, tol).dim() == n,
                  "complete_from_B: (A, B) is not reachable");
  const double a2 = norm2(A) * norm2(A);
  const double stein = (A * P * A.transpose() - P - B * B.transpose()).norm();
  detail::require(stein <= tol.scaled(std::max((a2 + 1.0) * P.norm(), B.squaredNorm())),
                  "complete_from_B: P does not solve A P A^T - P = B B^T (residual " +
                      std::to_string(stein) + ")");
  Matrix Q = n > 0 ? Matrix(P.inverse()) : Matrix(0, 0);
  Q = symmetrize(Q);
  const Matrix I = Matrix::Identity(m, m);
  detail::require(inertia(Matrix(I + B.transpose() * Q * B), tol).n_minus == 0,
                  "complete_from_B: I + B^T P^{-1} B is not positive semidefinite");

  Matrix W(n + m, n + m);
  W << A.transpose() * Q * A - Q, A.transpose() * Q * B, B.transpose() * Q * A,
      B.transpose() * Q * B + I;
  const Matrix F = psd_rank_factor(symmetrize(W), m, tol);
  Matrix C = F.leftCols(n);
  Matrix D = F.rightCols(m);
  // Left gauge: R D symmetric PSD with R = polar_orthogonal(D^T)^T.
  const Matrix R = polar_orthogonal(D.transpose()).transpose();
  return {R * C, symmetrize(R * D)};
}

/// Dual of complete_from_B: given an observable (A, C) and a solution Q of
/// A^T Q A - Q = C^T C, builds (B, D). The right gauge is fixed by
/// D = D^T >= 0.
inline Completion complete_from_C(const Matrix& A, const Matrix& C, const Matrix& Q,
                                  const Tolerances& tol = {}) {
  const Eigen::Index n = A.rows(), m = C.rows();
  detail::require_dims(A.cols() == n && C.cols() == n && Q.rows() == n && Q.cols() == n && m >= 1,
                       "complete_from_C: incompatible dimensions");
  detail::require_dims(is_symmetric(Q, tol.scaled(Q.norm())), "complete_from_C: Q not symmetric");
  detail::require(unobservable_subspace(A, C, tol).dim() == 0,
                  "complete_from_C: (A, C) is not observable");
  const double a2 = norm2(A) * norm2(A);
  const double stein = (A.transpose() * Q * A - Q - C.transpose() * C).norm();
  detail::require(stein <= tol.scaled(std::max((a2 + 1.0) * Q.norm(), C.squaredNorm())),
                  "complete_from_C: Q does not solve A^T Q A - Q = C^T C (residual " +
                      std::to_string(stein) + ")");
  Matrix P = n > 0 ? Matrix(Q.inverse()) : Matrix(0, 0);
  P = symmetrize(P);
  const Matrix I = Matrix::Identity(m, m);
  detail::require(inertia(Matrix(I + C * P * C.transpose()), tol).n_minus == 0,
                  "complete_from_C: I + C Q^{-1} C^T is not positive semidefinite");

  Matrix M(n + m, n + m);
  M << A * P * A.transpose() - P, A * P * C.transpose(), C * P * A.transpose(),
      C * P * C.transpose() + I;
  const Matrix F = psd_rank_factor(symmetrize(M), m, tol);  // F = [B^T | D^T]
  Matrix B = F.leftCols(n).transpose();
  Matrix D = F.rightCols(m).transpose();
  const Matrix U = polar_orthogonal(D);
  return {B * U, symmetrize(D * U)};
}

/// Given (A, B, C) and P, Q with the two Stein equations and P Q = I, finds
/// D such that (A, B, C, D) is all-pass.
inline Matrix complete_from_BC(const Matrix& A, const Matrix& B, const Matrix& C,
                               const Matrix& P, const Matrix& Q, const Tolerances& tol = {}) {
  const Eigen::Index n = A.rows(), m = B.cols();
  detail::require_dims(A.cols() == n && B.rows() == n && C.rows() == m && C.cols() == n &&
                           P.rows() == n && P.cols() == n && Q.rows() == n && Q.cols() == n &&
                           m >= 1,
                       "complete_from_BC: incompatible dimensions");
  const double a2 = norm2(A) * norm2(A);
  const double rp = (A * P * A.transpose() - P - B * B.transpose()).norm();
  const double rq = (A.transpose() * Q * A - Q - C.transpose() * C).norm();
  const double rpq = (P * Q - Matrix::Identity(n, n)).norm();
  detail::require(rp <= tol.scaled(std::max((a2 + 1.0) * P.norm(), B.squaredNorm())),
                  "complete_from_BC: A P A^T - P = B B^T violated (residual " +
                      std::to_string(rp) + ")");
  detail::require(rq <= tol.scaled(std::max((a2 + 1.0) * Q.norm(), C.squaredNorm())),
                  "complete_from_BC: A^T Q A - Q = C^T C violated (residual " +
                      std::to_string(rq) + ")");
  detail::require(rpq <= tol.scaled(norm2(P) * norm2(Q)),
                  "complete_from_BC: P Q = I violated (residual " + std::to_string(rpq) + ")");

  const Matrix Qs = symmetrize(Q);
  const Matrix I = Matrix::Identity(m, m);
  Matrix W(n + m, n + m);
  W << A.transpose() * Qs * A - Qs, A.transpose() * Qs * B, B.transpose() * Qs * A,
      B.transpose() * Qs * B + I;
  const Matrix F = psd_rank_factor(symmetrize(W), m, tol);
  const Matrix C0 = F.leftCols(n);
  const Matrix D0 = F.rightCols(m);
  const Matrix U = procrustes_left(C, C0);
  const double mismatch = (C - U * C0).norm();
  detail::require(mismatch <= tol.scaled(C.norm()) * 10.0,
                  "complete_from_BC: no orthogonal U with C = U C0 (C incompatible with Q)");
  return U * D0;
}

/// Right-multiplies by the orthogonal polar factor so that D = D^T >= 0.
/// The certificate is unchanged.
inline StateSpace normalize_D(const StateSpace& sys, const Tolerances& tol = {}) {
  const auto verdict = is_allpass(sys, tol);
  detail::require(verdict.is_allpass, "normalize_D: input is not all-pass (" + verdict.reason + ")");
  const Matrix U = polar_orthogonal(sys.D);
  return StateSpace(sys.A, sys.B * U, sys.C, symmetrize(sys.D * U));
}

}  // namespace allpass

#endif  // ALLPASS_ALLPASS_HPP

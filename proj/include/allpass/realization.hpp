#ifndef ALLPASS_REALIZATION_HPP
#define ALLPASS_REALIZATION_HPP

#include <random>
#include <utility>
#include <vector>

#include "allpass/linalg.hpp"

namespace allpass {

/// Discrete-time realization Q(z) = C (zI - A)^{-1} B + D of a square m x m
/// rational matrix. n = 0 represents the constant D.
struct StateSpace {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;

  StateSpace() = default;
  StateSpace(Matrix a, Matrix b, Matrix c, Matrix d)
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
    validate();
  }

  static StateSpace constant(const Matrix& d) {
    return StateSpace(Matrix(0, 0), Matrix(0, d.cols()), Matrix(d.rows(), 0), d);
  }

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return D.rows(); }

  void validate() const {
    const Eigen::Index n = A.rows();
    const Eigen::Index m = D.rows();
    detail::require_dims(A.cols() == n, "StateSpace: A must be square");
    detail::require_dims(m >= 1 && D.cols() == m, "StateSpace: D must be square with m >= 1");
    detail::require_dims(B.rows() == n && B.cols() == m, "StateSpace: B must be n x m");
    detail::require_dims(C.rows() == m && C.cols() == n, "StateSpace: C must be m x n");
    detail::require_dims(A.allFinite() && B.allFinite() && C.allFinite() && D.allFinite(),
                         "StateSpace: entries must be finite");
  }
};

struct DegreeReport {
  Eigen::Index n_state = 0;
  Eigen::Index n_reachable = 0;
  Eigen::Index n_observable = 0;
  Eigen::Index mcmillan = 0;
  bool minimal = false;
};

/// C (zI - A)^{-1} B + D. Throws PreconditionError when z is (numerically) a
/// pole.
inline CMatrix evaluate(const StateSpace& sys, Complex z, const Tolerances& tol = {}) {
  const Eigen::Index n = sys.n();
  CMatrix D = sys.D.cast<Complex>();
  if (n == 0) return D;
  CMatrix R = z * CMatrix::Identity(n, n) - sys.A.cast<Complex>();
  Eigen::JacobiSVD<CMatrix> svd(R, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s(n - 1) <= tol.scaled(std::max(s(0), std::abs(z))))
    throw PreconditionError("evaluate: z is a pole of the realization");
  CMatrix X = svd.solve(sys.B.cast<Complex>());
  return sys.C.cast<Complex>() * X + D;
}

/// Range of [B, AB, A^2 B, ...] built by orthogonalized Krylov steps.
inline Subspace reachability_subspace(const Matrix& A, const Matrix& B,
                                      const Tolerances& tol = {}) {
  const Eigen::Index n = A.rows();
  detail::require_dims(A.cols() == n && B.rows() == n,
                       "reachability_subspace: incompatible A, B");
  if (n == 0) return Subspace::zero(0);
  const double scale = std::max(norm2(A), norm2(B));
  const double cut = tol.scaled(scale) * 10.0;
  Matrix basis(n, 0);
  Matrix frontier = B;
  for (Eigen::Index iter = 0; iter <= n && basis.cols() < n && frontier.cols() > 0; ++iter) {
    Matrix fresh = frontier - basis * (basis.transpose() * frontier);
    fresh -= basis * (basis.transpose() * fresh);
    Matrix next(n, 0);
    if (fresh.size() > 0) {
      Eigen::JacobiSVD<Matrix> svd(fresh, Eigen::ComputeThinU);
      const auto& s = svd.singularValues();
      Eigen::Index r = 0;
      while (r < s.size() && s(r) > cut) ++r;
      next = svd.matrixU().leftCols(r);
    }
    if (next.cols() == 0) break;
    Matrix grown(n, basis.cols() + next.cols());
    grown << basis, next;
    basis = orth(grown, Tolerances{1e-12});
    frontier = A * next;
  }
  return Subspace(basis);
}

/// ker [C; CA; ...; CA^{n-1}].
inline Subspace unobservable_subspace(const Matrix& A, const Matrix& C,
                                      const Tolerances& tol = {}) {
  return reachability_subspace(A.transpose(), C.transpose(), tol).complement();
}

namespace detail {

inline StateSpace restrict_to(const StateSpace& sys, const Matrix& V) {
  return StateSpace(V.transpose() * sys.A * V, V.transpose() * sys.B, sys.C * V, sys.D);
}

}  // namespace detail

/// Two-stage Kalman reduction with orthonormal bases. The returned state
/// basis is not canonical; only basis-invariant properties are meaningful.
inline std::pair<StateSpace, DegreeReport> minimal_realization(const StateSpace& sys,
                                                               const Tolerances& tol = {}) {
  DegreeReport rep;
  rep.n_state = sys.n();
  const Subspace reach = reachability_subspace(sys.A, sys.B, tol);
  rep.n_reachable = reach.dim();
  rep.n_observable = sys.n() - unobservable_subspace(sys.A, sys.C, tol).dim();
  if (rep.n_reachable == sys.n() && rep.n_observable == sys.n()) {
    // Already minimal: keep the caller's state basis.
    rep.mcmillan = sys.n();
    rep.minimal = true;
    return {sys, rep};
  }
  StateSpace r = detail::restrict_to(sys, reach.basis());
  const Subspace obs = reachability_subspace(r.A.transpose(), r.C.transpose(), tol);
  StateSpace out = detail::restrict_to(r, obs.basis());
  rep.mcmillan = out.n();
  rep.minimal = rep.mcmillan == rep.n_state;
  return {std::move(out), rep};
}

inline DegreeReport degree_report(const StateSpace& sys, const Tolerances& tol = {}) {
  return minimal_realization(sys, tol).second;
}

inline bool is_minimal(const StateSpace& sys, const Tolerances& tol = {}) {
  return reachability_subspace(sys.A, sys.B, tol).dim() == sys.n() &&
         unobservable_subspace(sys.A, sys.C, tol).dim() == 0;
}

/// Realization of left(z) * right(z) with state [x_right; x_left].
inline StateSpace series(const StateSpace& left, const StateSpace& right) {
  detail::require_dims(left.m() == right.m(), "series: factors must have equal size");
  const Eigen::Index nl = left.n(), nr = right.n(), m = left.m();
  Matrix A = Matrix::Zero(nr + nl, nr + nl);
  A.topLeftCorner(nr, nr) = right.A;
  A.bottomLeftCorner(nl, nr) = left.B * right.C;
  A.bottomRightCorner(nl, nl) = left.A;
  Matrix B(nr + nl, m);
  B << right.B, left.B * right.D;
  Matrix C(m, nr + nl);
  C << left.D * right.C, left.C;
  return StateSpace(A, B, C, left.D * right.D);
}

/// Points z_k = exp(2 pi i k / count) on the unit circle.
inline std::vector<Complex> unit_circle_grid(int count) {
  std::vector<Complex> pts;
  pts.reserve(count);
  for (int k = 0; k < count; ++k) pts.push_back(std::polar(1.0, 2.0 * M_PI * k / count));
  return pts;
}

/// Unit-circle grid plus seeded off-circle points with modulus in [0.5, 2].
inline std::vector<Complex> comparison_grid(const Tolerances& tol = {}) {
  std::vector<Complex> pts = unit_circle_grid(tol.grid);
  std::mt19937_64 rng(tol.seed);
  std::uniform_real_distribution<double> radius(0.5, 2.0), angle(0.0, 2.0 * M_PI);
  for (int k = 0; k < tol.off_circle; ++k) pts.push_back(std::polar(radius(rng), angle(rng)));
  return pts;
}

struct GridDefect {
  double defect = 0.0;
  int skipped = 0;  // grid points dropped because they sit on a pole
};

/// max_k || Q(z_k) Q(z_k)^H - I || over the unit-circle grid.
inline GridDefect allpass_defect(const StateSpace& sys, int grid_size,
                                 const Tolerances& tol = {}) {
  GridDefect out;
  const Eigen::Index m = sys.m();
  for (const Complex z : unit_circle_grid(grid_size)) {
    try {
      CMatrix F = evaluate(sys, z, tol);
      out.defect =
          std::max(out.defect, norm2(CMatrix(F * F.adjoint() - CMatrix::Identity(m, m))));
    } catch (const PreconditionError&) {
      ++out.skipped;
    }
  }
  return out;
}

namespace detail {

/// ||a - b|| / max(1, ||a||, ||b||). On the unit circle, where all-pass
/// values have norm one, this is the plain distance.
inline double sample_distance(const CMatrix& a, const CMatrix& b) {
  return norm2(CMatrix(a - b)) / std::max({1.0, norm2(a), norm2(b)});
}

}  // namespace detail

/// Largest relative sample distance between f and g over the comparison
/// grid, skipping points at which either realization has a pole.
inline double transfer_distance(const StateSpace& f, const StateSpace& g,
                                const Tolerances& tol = {}) {
  detail::require_dims(f.m() == g.m(), "transfer_distance: size mismatch");
  double d = 0.0;
  for (const Complex z : comparison_grid(tol)) {
    try {
      d = std::max(d, detail::sample_distance(evaluate(f, z, tol), evaluate(g, z, tol)));
    } catch (const PreconditionError&) {
    }
  }
  return d;
}

enum class GaugeSide {
  /// f(z) ~ g(z) U
  Right,
  /// f(z) ~ U g(z)
  Left,
};

struct AlignedDistance {
  double distance = 0.0;
  Matrix U;
};

/// Relative grid distance between f and g after the best constant orthogonal
/// alignment (Procrustes on the stacked real and imaginary parts of the
/// samples).
inline AlignedDistance aligned_distance(const StateSpace& f, const StateSpace& g,
                                        GaugeSide side, const Tolerances& tol = {}) {
  detail::require_dims(f.m() == g.m(), "aligned_distance: size mismatch");
  const Eigen::Index m = f.m();
  std::vector<CMatrix> fs, gs;
  for (const Complex z : comparison_grid(tol)) {
    try {
      CMatrix a = evaluate(f, z, tol);
      CMatrix b = evaluate(g, z, tol);
      fs.push_back(std::move(a));
      gs.push_back(std::move(b));
    } catch (const PreconditionError&) {
    }
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(fs.size()) * 2 * m;
  Matrix F(rows, m), G(rows, m);
  for (std::size_t k = 0; k < fs.size(); ++k) {
    // For a left gauge, transpose samples so the problem becomes a right one.
    CMatrix a = side == GaugeSide::Right ? fs[k] : CMatrix(fs[k].transpose());
    CMatrix b = side == GaugeSide::Right ? gs[k] : CMatrix(gs[k].transpose());
    const Eigen::Index r = static_cast<Eigen::Index>(k) * 2 * m;
    F.middleRows(r, m) = a.real();
    F.middleRows(r + m, m) = a.imag();
    G.middleRows(r, m) = b.real();
    G.middleRows(r + m, m) = b.imag();
  }
  // min ||F - G U||: U = polar factor of G^T F.
  Matrix U = procrustes_left(Matrix(F.transpose()), Matrix(G.transpose())).transpose();
  AlignedDistance out;
  out.U = side == GaugeSide::Right ? U : Matrix(U.transpose());
  for (std::size_t k = 0; k < fs.size(); ++k) {
    CMatrix aligned = side == GaugeSide::Right ? CMatrix(gs[k] * out.U.cast<Complex>())
                                               : CMatrix(out.U.cast<Complex>() * gs[k]);
    out.distance = std::max(out.distance, detail::sample_distance(fs[k], aligned));
  }
  return out;
}

}  // namespace allpass

#endif  // ALLPASS_REALIZATION_HPP

#ifndef ALLPASS_LINALG_HPP
#define ALLPASS_LINALG_HPP

// Dense real kernels: Stein equations over symmetric unknowns, PSD rank
// factorization, pseudoinverse, polar factor, inertia and invariant
// subspaces from ordered real Schur forms.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "allpass/config.hpp"

namespace allpass {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

/// Spectral norm; zero for empty matrices.
template <class Derived>
double norm2(const Eigen::MatrixBase<Derived>& expr) {
  using Plain = typename Derived::PlainObject;
  const Plain M = expr;
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Plain> svd(M);
  return svd.singularValues()(0);
}

inline Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

inline bool is_symmetric(const Matrix& M, double tol) {
  return M.rows() == M.cols() && (M - M.transpose()).norm() <= tol;
}

/// Orthonormal basis of the column space of `M`, rank decided relative to the
/// largest singular value.
inline Matrix orth(const Matrix& M, const Tolerances& tol = {}) {
  if (M.size() == 0) return Matrix(M.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU);
  const auto& s = svd.singularValues();
  const double cut = tol.scaled(s.size() ? s(0) : 0.0);
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  return svd.matrixU().leftCols(r);
}

/// Orthonormal basis of ker(M).
inline Matrix null_space(const Matrix& M, const Tolerances& tol = {}) {
  const Eigen::Index cols = M.cols();
  if (M.rows() == 0 || cols == 0) return Matrix::Identity(cols, cols);
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cut = tol.scaled(s(0));
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  return svd.matrixV().rightCols(cols - r);
}

inline int numerical_rank(const Matrix& M, const Tolerances& tol = {}) {
  return static_cast<int>(orth(M, tol).cols());
}

// ---------------------------------------------------------------------------
// Subspace

/// A subspace of R^n stored as an orthonormal basis.
class Subspace {
 public:
  Subspace() = default;

  /// Wraps a basis whose columns are already orthonormal (checked).
  explicit Subspace(Matrix basis) : basis_(std::move(basis)) {
    const Eigen::Index k = basis_.cols();
    if (k > 0 && (basis_.transpose() * basis_ - Matrix::Identity(k, k)).norm() > 1e-8)
      throw DimensionError("Subspace: basis columns are not orthonormal");
  }

  /// Span of arbitrary columns; the basis is orthonormalized.
  static Subspace span(const Matrix& columns, const Tolerances& tol = {}) {
    return Subspace(orth(columns, tol));
  }
  static Subspace zero(Eigen::Index n) { return Subspace(Matrix(n, 0)); }
  static Subspace full(Eigen::Index n) { return Subspace(Matrix::Identity(n, n)); }

  Eigen::Index ambient_dim() const { return basis_.rows(); }
  Eigen::Index dim() const { return basis_.cols(); }
  const Matrix& basis() const { return basis_; }

  Matrix projector() const { return basis_ * basis_.transpose(); }

  Subspace complement() const {
    const Eigen::Index n = ambient_dim();
    if (dim() == 0) return full(n);
    if (dim() == n) return zero(n);
    Eigen::HouseholderQR<Matrix> qr(basis_);
    Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
    return Subspace(Matrix(Q.rightCols(n - dim())));
  }

  /// ||(I - Pi) M Pi|| in the spectral norm.
  double invariance_defect(const Matrix& M) const {
    const Eigen::Index n = ambient_dim();
    if (dim() == 0) return 0.0;
    Matrix Pi = projector();
    return norm2((Matrix::Identity(n, n) - Pi) * M * Pi);
  }

  bool is_invariant(const Matrix& M, const Tolerances& tol = {}) const {
    return invariance_defect(M) <= tol.scaled(norm2(M));
  }

  /// Spectral-norm distance between the orthogonal projectors.
  double distance(const Subspace& other) const {
    return norm2(Matrix(projector() - other.projector()));
  }

 private:
  Matrix basis_;
};

// ---------------------------------------------------------------------------
// Symmetric parametrization shared by Stein and stacked linear solves.

namespace detail {

inline Eigen::Index sym_count(Eigen::Index n) { return n * (n + 1) / 2; }

/// k-th element of the standard basis of symmetric n x n matrices
/// (ordered (0,0), (0,1), ..., (0,n-1), (1,1), ...).
inline Matrix sym_basis(Eigen::Index n, Eigen::Index k) {
  Matrix E = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      if (k-- == 0) {
        E(i, j) = 1.0;
        E(j, i) = 1.0;
        return E;
      }
    }
  }
  return E;
}

inline Matrix from_sym_coords(const Vector& x, Eigen::Index n) {
  Matrix X = Matrix::Zero(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j, ++k) {
      X(i, j) = x(k);
      X(j, i) = x(k);
    }
  return X;
}

/// Matrix of the linear map X -> map(X) restricted to symmetric X, acting on
/// symmetric coordinates and producing the column-major vectorization.
template <class Map>
Matrix symmetric_operator(Eigen::Index n, Map&& map) {
  const Eigen::Index cols = sym_count(n);
  Matrix op;
  for (Eigen::Index k = 0; k < cols; ++k) {
    Matrix image = map(sym_basis(n, k));
    if (k == 0) op.resize(image.size(), cols);
    op.col(k) = Eigen::Map<const Vector>(image.data(), image.size());
  }
  return op;
}

/// Least-squares solve with an explicit nullspace.
struct LeastSquares {
  Vector solution;
  Matrix nullspace;  // orthonormal columns
  double residual = 0.0;
};

inline LeastSquares least_squares(const Matrix& op, const Vector& rhs, const Tolerances& tol) {
  LeastSquares out;
  const Eigen::Index cols = op.cols();
  if (cols == 0) {
    out.solution = Vector(0);
    out.nullspace = Matrix(0, 0);
    out.residual = rhs.norm();
    return out;
  }
  if (op.rows() == 0) {
    out.solution = Vector::Zero(cols);
    out.nullspace = Matrix::Identity(cols, cols);
    return out;
  }
  Eigen::JacobiSVD<Matrix> svd(op, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cut = tol.scaled(s(0));
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  Vector coeff = svd.matrixU().leftCols(r).transpose() * rhs;
  for (Eigen::Index i = 0; i < r; ++i) coeff(i) /= s(i);
  out.solution = svd.matrixV().leftCols(r) * coeff;
  out.nullspace = svd.matrixV().rightCols(cols - r);
  out.residual = (op * out.solution - rhs).norm();
  return out;
}

/// Flips `v` so that its first entry above `eps` in magnitude is positive.
template <class V>
void fix_sign(V&& v, double eps) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > eps) {
      if (v(i) < 0) v = -v;
      return;
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stein equations

enum class SteinForm {
  /// A X A^T - X = rhs
  Direct,
  /// A^T X A - X = rhs
  Transposed,
};

struct SteinSolutionSet {
  std::optional<Matrix> particular;
  std::vector<Matrix> homogeneous_basis;
  double residual = 0.0;
};

/// Solves the Stein equation over symmetric unknowns by least squares.
///
/// The particular solution is the minimum-norm one and is dropped when the
/// residual is not negligible. The homogeneous basis spans every symmetric
/// solution of the equation with zero right-hand side; each element has unit
/// Frobenius norm and a positive leading coordinate.
inline SteinSolutionSet solve_stein_sym(const Matrix& A, const Matrix& rhs, SteinForm form,
                                        const Tolerances& tol = {}) {
  const Eigen::Index n = A.rows();
  detail::require_dims(A.cols() == n, "solve_stein_sym: A must be square");
  detail::require_dims(rhs.rows() == n && rhs.cols() == n,
                       "solve_stein_sym: rhs must match A");
  detail::require_dims(is_symmetric(rhs, tol.scaled(rhs.norm())),
                       "solve_stein_sym: rhs must be symmetric");

  SteinSolutionSet out;
  if (n == 0) {
    out.particular = Matrix(0, 0);
    return out;
  }
  const Matrix At = A.transpose();
  Matrix op = detail::symmetric_operator(n, [&](const Matrix& X) -> Matrix {
    return form == SteinForm::Direct ? Matrix(A * X * At - X) : Matrix(At * X * A - X);
  });
  const Matrix R = symmetrize(rhs);
  Vector b = Eigen::Map<const Vector>(R.data(), R.size());
  auto ls = detail::least_squares(op, b, tol);

  Matrix X = detail::from_sym_coords(ls.solution, n);
  out.residual = ls.residual;
  const double a2 = norm2(A) * norm2(A);
  const double scale = std::max({R.norm(), (a2 + 1.0) * X.norm()});
  if (ls.residual <= tol.scaled(scale)) out.particular = X;

  for (Eigen::Index k = 0; k < ls.nullspace.cols(); ++k) {
    Vector v = ls.nullspace.col(k);
    Matrix D = detail::from_sym_coords(v, n);
    D /= D.norm();
    Vector flat = Eigen::Map<const Vector>(D.data(), D.size());
    detail::fix_sign(flat, 1e-12);
    out.homogeneous_basis.push_back(Eigen::Map<const Matrix>(flat.data(), n, n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Factorizations

/// Full-row-rank F (m x k) with F^T F = W for a PSD W of rank m.
///
/// Rows are sqrt(lambda_i) v_i^T for the m largest eigenpairs in descending
/// order, each eigenvector signed so its first non-negligible entry is
/// positive.
inline Matrix psd_rank_factor(const Matrix& W, Eigen::Index m, const Tolerances& tol = {}) {
  const Eigen::Index k = W.rows();
  detail::require_dims(W.cols() == k, "psd_rank_factor: W must be square");
  detail::require_dims(m >= 0 && m <= k, "psd_rank_factor: rank out of range");
  if (k == 0) return Matrix(m, 0);
  detail::require_dims(is_symmetric(W, tol.scaled(W.norm())),
                       "psd_rank_factor: W must be symmetric");

  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(W));
  const Vector& ev = es.eigenvalues();  // ascending
  const double top = std::max(std::abs(ev(0)), std::abs(ev(k - 1)));
  const double cut = tol.scaled(top);
  if (ev(0) < -cut)
    throw PreconditionError("psd_rank_factor: matrix is indefinite (min eigenvalue " +
                            std::to_string(ev(0)) + ")");
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < k; ++i)
    if (ev(i) > cut) ++rank;
  if (rank != m)
    throw PreconditionError("psd_rank_factor: numerical rank " + std::to_string(rank) +
                            " differs from " + std::to_string(m));

  // Eigenvectors of a repeated eigenvalue are arbitrary; replace each cluster
  // by Gram-Schmidt on the projections of e_1, e_2, ... so the result is
  // deterministic (W = I gives F = I).
  Matrix F(m, k);
  Eigen::Index r = 0;
  while (r < m) {
    Eigen::Index end = r + 1;
    while (end < m && std::abs(ev(k - 1 - r) - ev(k - 1 - end)) <= cut) ++end;
    const Eigen::Index size = end - r;
    const Matrix V = es.eigenvectors().middleCols(k - end, size);
    const Matrix Pc = V * V.transpose();
    Matrix basis(k, size);
    Eigen::Index got = 0;
    for (Eigen::Index j = 0; j < k && got < size; ++j) {
      Vector v = Pc.col(j);
      for (Eigen::Index i = 0; i < got; ++i) v -= basis.col(i).dot(v) * basis.col(i);
      if (v.norm() > 1e-6) basis.col(got++) = v.normalized();
    }
    for (Eigen::Index i = 0; i < size; ++i) {
      const Eigen::Index idx = k - 1 - (r + i);
      Vector v = got == size ? Vector(basis.col(i)) : Vector(es.eigenvectors().col(idx));
      detail::fix_sign(v, 1e-10);
      F.row(r + i) = std::sqrt(ev(idx)) * v.transpose();
    }
    r = end;
  }
  return F;
}

/// Moore-Penrose pseudoinverse with a relative singular-value cutoff.
inline Matrix pinv(const Matrix& M, const Tolerances& tol = {}) {
  if (M.size() == 0) return Matrix(M.cols(), M.rows());
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cut = tol.rel * s(0);
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cut && s(i) > 0.0) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Orthogonal U such that D U is symmetric positive semidefinite.
inline Matrix polar_orthogonal(const Matrix& D) {
  detail::require_dims(D.rows() == D.cols(), "polar_orthogonal: D must be square");
  if (D.size() == 0) return Matrix(0, 0);
  Eigen::JacobiSVD<Matrix> svd(D, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixV() * svd.matrixU().transpose();
}

/// Orthogonal U minimizing ||target - U source|| (orthogonal Procrustes).
inline Matrix procrustes_left(const Matrix& target, const Matrix& source) {
  Matrix M = target * source.transpose();
  if (M.size() == 0) return Matrix::Identity(M.rows(), M.cols());
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

/// Symmetric square root of a symmetric positive definite matrix.
inline Matrix sqrtm_spd(const Matrix& S, const Tolerances& tol = {}) {
  if (S.size() == 0) return S;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S));
  const Vector& ev = es.eigenvalues();
  if (ev(0) <= tol.scaled(std::abs(ev(ev.size() - 1))))
    throw PreconditionError("sqrtm_spd: matrix is not positive definite");
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

// ---------------------------------------------------------------------------
// Spectral helpers

struct Inertia {
  int n_plus = 0;
  int n_minus = 0;
  int n_zero = 0;
  friend bool operator==(const Inertia&, const Inertia&) = default;
};

inline Inertia inertia(const Matrix& S, const Tolerances& tol = {}) {
  detail::require_dims(S.rows() == S.cols(), "inertia: matrix must be square");
  Inertia out;
  if (S.size() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S), Eigen::EigenvaluesOnly);
  const Vector& ev = es.eigenvalues();
  const double cut = tol.scaled(std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1))));
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > cut)
      ++out.n_plus;
    else if (ev(i) < -cut)
      ++out.n_minus;
    else
      ++out.n_zero;
  }
  return out;
}

inline Eigen::VectorXcd eigenvalues(const Matrix& A) {
  if (A.size() == 0) return Eigen::VectorXcd(0);
  Eigen::EigenSolver<Matrix> es(A, false);
  return es.eigenvalues();
}

/// True iff A has no eigenvalue pair (lambda, mu) with lambda * mu = 1.
inline bool is_unmixed(const Matrix& A, const Tolerances& tol = {}) {
  detail::require_dims(A.rows() == A.cols(), "is_unmixed: A must be square");
  const Eigen::VectorXcd ev = eigenvalues(A);
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    for (Eigen::Index j = i; j < ev.size(); ++j)
      if (std::abs(ev(i) * ev(j) - 1.0) <= tol.scaled(1.0)) return false;
  return true;
}

namespace detail {

struct RealSchur {
  Matrix T;
  Matrix Z;
  std::vector<Eigen::Index> block_start;  // first row of each diagonal block
  std::vector<Eigen::Index> block_size;   // 1 or 2
};

inline RealSchur real_schur(const Matrix& A) {
  const lapack_int n = static_cast<lapack_int>(A.rows());
  RealSchur out;
  out.T = A;
  out.Z = Matrix::Identity(n, n);
  if (n == 0) return out;
  std::vector<double> wr(n), wi(n);
  lapack_int sdim = 0;
  const lapack_int info = LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'N', nullptr, n, out.T.data(), n,
                                        &sdim, wr.data(), wi.data(), out.Z.data(), n);
  if (info != 0) throw NumericalError("real Schur decomposition failed");
  for (Eigen::Index i = 0; i < n;) {
    const bool pair = i + 1 < n && out.T(i + 1, i) != 0.0;
    out.block_start.push_back(i);
    out.block_size.push_back(pair ? 2 : 1);
    i += pair ? 2 : 1;
  }
  return out;
}

/// Leading Schur vectors after moving the selected blocks to the top.
inline std::optional<Matrix> reordered_leading_basis(const RealSchur& schur,
                                                     const std::vector<bool>& chosen) {
  const lapack_int n = static_cast<lapack_int>(schur.T.rows());
  Matrix T = schur.T;
  Matrix Z = schur.Z;
  std::vector<lapack_logical> select(n, 0);
  for (std::size_t b = 0; b < chosen.size(); ++b)
    if (chosen[b])
      for (Eigen::Index r = 0; r < schur.block_size[b]; ++r)
        select[schur.block_start[b] + r] = 1;
  std::vector<double> wr(n), wi(n);
  lapack_int m = 0;
  double s = 0.0, sep = 0.0;
  // The high-level LAPACKE wrapper leaves iwork null for job 'N', which dtrsen
  // still writes to; pass explicit workspaces instead.
  std::vector<double> work(std::max<lapack_int>(1, n));
  std::vector<lapack_int> iwork(1);
  const lapack_int info = LAPACKE_dtrsen_work(
      LAPACK_COL_MAJOR, 'N', 'V', select.data(), n, T.data(), n, Z.data(), n, wr.data(),
      wi.data(), &m, &s, &sep, work.data(), static_cast<lapack_int>(work.size()), iwork.data(), 1);
  if (info != 0) return std::nullopt;
  return Matrix(Z.leftCols(m));
}

}  // namespace detail

/// A-invariant subspaces spanned by leading vectors of reordered real Schur
/// forms.
///
/// Blocks of the Schur form (real eigenvalues, complex conjugate pairs) are
/// selected in order of increasing block count; each selection is moved to
/// the top and its leading Schur vectors are kept. The zero subspace comes
/// first and the full space is always present (last). Duplicates are removed
/// and every returned subspace passes the invariance test.
inline std::vector<Subspace> invariant_subspaces(const Matrix& A, std::size_t max_count,
                                                 const Tolerances& tol = {}) {
  const Eigen::Index n = A.rows();
  detail::require_dims(A.cols() == n, "invariant_subspaces: A must be square");
  std::vector<Subspace> out;
  out.push_back(Subspace::zero(n));
  if (n == 0 || max_count <= 1) {
    if (n > 0 && max_count == 1) out.back() = Subspace::full(n);
    return out;
  }
  const auto schur = detail::real_schur(A);
  const std::size_t blocks = schur.block_start.size();
  const double dedup = std::max(100.0 * tol.rel, 1e-10);

  auto try_add = [&](const std::vector<bool>& chosen) {
    auto basis = detail::reordered_leading_basis(schur, chosen);
    if (!basis) return;
    Subspace s(orth(*basis, tol));
    if (!s.is_invariant(A, tol)) return;
    for (const auto& prev : out)
      if (prev.dim() == s.dim() && prev.distance(s) <= dedup) return;
    out.push_back(std::move(s));
  };

  // Proper, nonzero selections by increasing block count, lexicographic
  // within a count.
  for (std::size_t count = 1; count < blocks && out.size() + 1 < max_count; ++count) {
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = i;
    while (out.size() + 1 < max_count) {
      std::vector<bool> chosen(blocks, false);
      for (auto i : idx) chosen[i] = true;
      try_add(chosen);
      // next combination in lexicographic order
      std::size_t pos = count;
      while (pos > 0 && idx[pos - 1] == blocks - count + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t j = pos; j < count; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  out.push_back(Subspace::full(n));
  return out;
}

}  // namespace allpass

#endif  // ALLPASS_LINALG_HPP

// Copyright the gapcheck authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "gapcheck/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <vector>
#include <fmt/format.h>
#include <lapacke.h>

namespace gapcheck::linalg
{

LinalgError::LinalgError(std::string_view operation, const std::string &message)
  : std::runtime_error(fmt::format("{}: {}", operation, message)), op(operation)
{
}

RankError::RankError(std::string_view operation, Index deficient_columns, Index total_columns)
  : LinalgError(operation, fmt::format("basis is rank deficient ({} of {} columns)",
                                       deficient_columns, total_columns)),
    deficient(deficient_columns)
{
}

void require_finite(const Matrix &X, std::string_view operation)
{
  if (!X.allFinite())
  {
    throw NonFiniteError(operation, "non-finite matrix entry");
  }
}

void require_square(const Matrix &X, std::string_view operation)
{
  if (X.rows() != X.cols())
  {
    throw ShapeError(operation,
                     fmt::format("expected a square matrix, got {}x{}", X.rows(), X.cols()));
  }
}

double symmetry_defect(const Matrix &X)
{
  if (X.size() == 0)
  {
    return 0.0;
  }
  const double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
  return (X - X.transpose()).cwiseAbs().maxCoeff() / scale;
}

namespace
{

lapack_int to_lapack(Index n)
{
  return static_cast<lapack_int>(n);
}

// LAPACK reads only the lower triangle; symmetrizing first keeps results independent of
// which triangle carries the rounding noise.
Matrix symmetrized(const Matrix &X)
{
  return 0.5 * (X + X.transpose());
}

void check_pair(const Matrix &A, const Matrix &B, std::string_view op)
{
  require_square(A, op);
  require_square(B, op);
  if (A.rows() != B.rows())
  {
    throw ShapeError(op, fmt::format("order mismatch {} vs {}", A.rows(), B.rows()));
  }
  require_finite(A, op);
  require_finite(B, op);
}

// Solves A v = λ B v in place. On exit A holds the B-orthonormal eigenvectors when
// vectors is set.
Vector sygvd(Matrix &A, Matrix &B, bool vectors, std::string_view op)
{
  const Index n = A.rows();
  Vector w(n);
  if (n == 0)
  {
    return w;
  }
  const lapack_int info =
      LAPACKE_dsygvd(LAPACK_COL_MAJOR, 1, vectors ? 'V' : 'N', 'L', to_lapack(n), A.data(),
                     to_lapack(n), B.data(), to_lapack(n), w.data());
  if (info > to_lapack(n))
  {
    throw DefinitenessError(
        op, fmt::format("second matrix is not positive definite (leading minor {})",
                        info - to_lapack(n)));
  }
  if (info != 0)
  {
    throw LinalgError(op, fmt::format("dsygvd failed with info = {}", info));
  }
  return w;
}

Vector syevd(Matrix &A, bool vectors, std::string_view op)
{
  const Index n = A.rows();
  Vector w(n);
  if (n == 0)
  {
    return w;
  }
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'L',
                                         to_lapack(n), A.data(), to_lapack(n), w.data());
  if (info != 0)
  {
    throw LinalgError(op, fmt::format("dsyevd failed with info = {}", info));
  }
  return w;
}

}  // namespace

EigenResult generalized_eigs(const Matrix &A, const Matrix &B, Index k)
{
  constexpr std::string_view op = "generalized_eigs";
  check_pair(A, B, op);
  if (k < 0 || k > A.rows())
  {
    throw ShapeError(
        op, fmt::format("requested {} pairs of a {}-dimensional pencil", k, A.rows()));
  }
  Matrix a = symmetrized(A), b = symmetrized(B);
  Vector w = sygvd(a, b, true, op);
  return {w.head(k), a.leftCols(k)};
}

Vector generalized_eigenvalues(const Matrix &A, const Matrix &B)
{
  constexpr std::string_view op = "generalized_eigenvalues";
  check_pair(A, B, op);
  Matrix a = symmetrized(A), b = symmetrized(B);
  return sygvd(a, b, false, op);
}

EigenResult symmetric_eigs(const Matrix &A)
{
  constexpr std::string_view op = "symmetric_eigs";
  require_square(A, op);
  require_finite(A, op);
  Matrix a = symmetrized(A);
  Vector w = syevd(a, true, op);
  return {std::move(w), std::move(a)};
}

Vector symmetric_eigenvalues(const Matrix &A)
{
  constexpr std::string_view op = "symmetric_eigenvalues";
  require_square(A, op);
  require_finite(A, op);
  Matrix a = symmetrized(A);
  return syevd(a, false, op);
}

double largest_eigenvalue(const Matrix &A)
{
  constexpr std::string_view op = "largest_eigenvalue";
  require_square(A, op);
  require_finite(A, op);
  const Index n = A.rows();
  if (n == 0)
  {
    throw ShapeError(op, "empty matrix");
  }
  Matrix a = symmetrized(A);
  lapack_int found = 0;
  // dsyevr uses the full eigenvalue array as workspace even when one value is requested.
  Vector w = Vector::Zero(n);
  double z[1] = {0.0};
  lapack_int isuppz[2] = {0, 0};
  const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'N', 'I', 'L', to_lapack(n),
                                         a.data(), to_lapack(n), 0.0, 0.0, to_lapack(n),
                                         to_lapack(n), 0.0, &found, w.data(), z, 1, isuppz);
  if (info != 0 || found != 1)
  {
    throw LinalgError(op, fmt::format("dsyevr failed with info = {}", info));
  }
  return w(0);
}

KernelSplit nullspace_gram(const Matrix &A, const Matrix &S, double tol)
{
  constexpr std::string_view op = "nullspace_gram";
  check_pair(A, S, op);
  const Index n = A.rows();
  KernelSplit out;
  if (n == 0)
  {
    out.kernel.resize(0, 0);
    out.complement.resize(0, 0);
    return out;
  }
  Matrix vecs = symmetrized(A), s = symmetrized(S);
  const Vector theta = sygvd(vecs, s, true, op);

  // Eigenvalues of (A, S) lie in [0, 1) for PSD A; anything clearly negative means the
  // form is indefinite rather than rounded.
  if (theta(0) < -1e-8)
  {
    throw DefinitenessError(op, fmt::format("form is not positive semidefinite "
                                            "(generalized eigenvalue {:.3e})",
                                            theta(0)));
  }
  const double theta_max = theta(n - 1);
  Index nker = 0;
  if (theta_max <= tol)
  {
    // Everything is kernel. A form that is not exactly zero but still vanishes to
    // tolerance is flagged so callers can report the degeneracy.
    nker = n;
    out.degenerate = A.cwiseAbs().maxCoeff() > 0.0;
  }
  else
  {
    const double cut = tol * theta_max;
    while (nker < n && theta(nker) <= cut)
    {
      ++nker;
    }
  }
  out.kernel = vecs.leftCols(nker);
  out.complement = vecs.rightCols(n - nker);
  out.complement_values = theta.tail(n - nker);
  return out;
}

Matrix orthonormalize(const Matrix &B, const Matrix &S, double rank_tol)
{
  constexpr std::string_view op = "orthonormalize";
  require_square(S, op);
  if (B.rows() != S.rows())
  {
    throw ShapeError(
        op, fmt::format("basis has {} rows, Gram matrix order {}", B.rows(), S.rows()));
  }
  require_finite(B, op);
  if (B.cols() == 0)
  {
    return B;
  }
  Matrix Q = B;
  // The second pass removes the O(ε·κ) loss of orthogonality left by the first.
  for (int pass = 0; pass < 2; ++pass)
  {
    const Matrix G = Q.transpose() * (S * Q);
    const EigenResult eig = symmetric_eigs(G);
    const double top = eig.values.maxCoeff();
    if (!(top > 0.0))
    {
      throw RankError(op, B.cols(), B.cols());
    }
    const double floor = rank_tol * rank_tol * top;
    const Index bad = (eig.values.array() <= floor).count();
    if (bad > 0)
    {
      throw RankError(op, bad, B.cols());
    }
    const Vector inv_sqrt = eig.values.cwiseSqrt().cwiseInverse();
    Q = Q * (eig.vectors * inv_sqrt.asDiagonal() * eig.vectors.transpose());
  }
  return Q;
}

double principal_gap(const Matrix &U, const Matrix &SU, const Matrix &Uprime,
                     const Matrix &SUprime)
{
  constexpr std::string_view op = "principal_gap";
  if (U.cols() == 0)
  {
    throw ShapeError(op, "gap from an empty subspace is undefined");
  }
  if (U.rows() != Uprime.rows() && Uprime.cols() > 0)
  {
    throw ShapeError(
        op, fmt::format("host dimensions differ ({} vs {})", U.rows(), Uprime.rows()));
  }
  if (Uprime.cols() == 0)
  {
    return 1.0;
  }
  // Residual form: the S-orthogonal error R = U − U'(U'ᵀSU) is formed explicitly, so
  // small gaps are resolved to absolute accuracy instead of through 1 − cos².
  const Matrix C = SUprime.transpose() * U;
  const Matrix R = U - Uprime * C;
  const Matrix SR = SU - SUprime * C;
  Matrix G = R.transpose() * SR;
  G = 0.5 * (G + G.transpose());
  const double top = largest_eigenvalue(G);
  return std::clamp(std::sqrt(std::max(top, 0.0)), 0.0, 1.0);
}

double principal_gap(const Matrix &U, const Matrix &Uprime, const Matrix &S)
{
  require_square(S, "principal_gap");
  if (U.rows() != S.rows())
  {
    throw ShapeError("principal_gap", "subspace host dimension does not match Gram order");
  }
  return principal_gap(U, S * U, Uprime, S * Uprime);
}

double spectral_norm(const Matrix &T)
{
  if (T.size() == 0)
  {
    return 0.0;
  }
  // Eigenvalues of the smaller Gram matrix; cheaper than an SVD for tall blocks.
  const Matrix G = T.rows() < T.cols() ? Matrix(T * T.transpose()) : Matrix(T.transpose() * T);
  return std::sqrt(std::max(largest_eigenvalue(G), 0.0));
}

double op_norm(const Matrix &T, const Matrix &S_dom, const Matrix &S_ran)
{
  constexpr std::string_view op = "op_norm";
  require_square(S_dom, op);
  require_square(S_ran, op);
  if (T.cols() != S_dom.rows() || T.rows() != S_ran.rows())
  {
    throw ShapeError(op, fmt::format("map is {}x{}, Gram orders {} (domain) and {} (range)",
                                     T.rows(), T.cols(), S_dom.rows(), S_ran.rows()));
  }
  require_finite(T, op);
  if (T.size() == 0)
  {
    return 0.0;
  }
  Eigen::LLT<Matrix> dom(S_dom), ran(S_ran);
  if (dom.info() != Eigen::Success)
  {
    throw DefinitenessError(op, "domain Gram matrix is not positive definite");
  }
  if (ran.info() != Eigen::Success)
  {
    throw DefinitenessError(op, "range Gram matrix is not positive definite");
  }
  // Y = L_ranᵀ T L_dom⁻ᵀ maps Euclidean coordinates to Euclidean coordinates.
  const Matrix LT = ran.matrixU() * T;
  const Matrix Y = dom.matrixL().solve(LT.transpose()).transpose();
  const double scale = Y.cwiseAbs().maxCoeff();
  if (Y.rows() == Y.cols() && (Y - Y.transpose()).cwiseAbs().maxCoeff() <= 1e-13 * scale)
  {
    const Vector w = symmetric_eigenvalues(Y);
    return std::max(std::abs(w(0)), std::abs(w(w.size() - 1)));
  }
  return spectral_norm(Y);
}

}  // namespace gapcheck::linalg

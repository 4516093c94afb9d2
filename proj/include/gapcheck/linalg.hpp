// Copyright the gapcheck authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef GAPCHECK_LINALG_HPP
#define GAPCHECK_LINALG_HPP

#include <stdexcept>
#include <string>
#include <string_view>
#include <Eigen/Dense>

namespace gapcheck
{

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg
{

//
// Errors raised by the dense kernels. Every error carries the name of the operation that
// failed so that drivers can report it without parsing the message.
//
class LinalgError : public std::runtime_error
{
  std::string op;

public:
  LinalgError(std::string_view operation, const std::string &message);
  const std::string &operation() const { return op; }
};

class NonFiniteError : public LinalgError
{
public:
  using LinalgError::LinalgError;
};

// A matrix expected to be positive (semi)definite is not.
class DefinitenessError : public LinalgError
{
public:
  using LinalgError::LinalgError;
};

class ShapeError : public LinalgError
{
public:
  using LinalgError::LinalgError;
};

class RankError : public LinalgError
{
  Index deficient;

public:
  RankError(std::string_view operation, Index deficient_columns, Index total_columns);
  Index deficient_columns() const { return deficient; }
};

struct EigenResult
{
  // Ascending.
  Vector values;
  // B-orthonormal columns, one per value.
  Matrix vectors;
};

struct KernelSplit
{
  // S-orthonormal basis of the numerical nullspace of A.
  Matrix kernel;
  // S-orthonormal basis of the remaining generalized eigenvectors, S-orthogonal to kernel.
  Matrix complement;
  // Generalized eigenvalues of (A, S) belonging to the complement columns, ascending.
  Vector complement_values;
  // Set when A is nonzero but every eigenvalue falls below the kernel threshold.
  bool degenerate = false;
};

void require_finite(const Matrix &X, std::string_view operation);
void require_square(const Matrix &X, std::string_view operation);

// Relative symmetry defect ‖X − Xᵀ‖_max / max(1, ‖X‖_max).
double symmetry_defect(const Matrix &X);

// Smallest k eigenpairs of A v = λ B v with B symmetric positive definite.
EigenResult generalized_eigs(const Matrix &A, const Matrix &B, Index k);

// All eigenvalues of A v = λ B v, ascending, without eigenvectors.
Vector generalized_eigenvalues(const Matrix &A, const Matrix &B);

// Full eigendecomposition of a symmetric matrix, ascending.
EigenResult symmetric_eigs(const Matrix &A);
Vector symmetric_eigenvalues(const Matrix &A);

// Largest eigenvalue of a symmetric matrix.
double largest_eigenvalue(const Matrix &A);

// Splits R^n into the numerical kernel of A (generalized eigenvalues of (A, S) at or below
// tol·λ_max) and its S-orthogonal complement.
KernelSplit nullspace_gram(const Matrix &A, const Matrix &S, double tol = 1e-10);

// Returns Q with QᵀSQ = I spanning the columns of B. Symmetric (Löwdin) orthonormalization
// is used, so an already S-orthonormal B is returned unchanged up to rounding.
Matrix orthonormalize(const Matrix &B, const Matrix &S, double rank_tol = 1e-8);

// Unsymmetrized gap sup_{u∈U} inf_{u'∈U'} ‖u − u'‖_S / ‖u‖_S. Both bases must be
// S-orthonormal. An empty U' gives 1; an empty U is an error.
double principal_gap(const Matrix &U, const Matrix &Uprime, const Matrix &S);

// Same, with the products S·U and S·U' supplied by the caller.
double principal_gap(const Matrix &U, const Matrix &SU, const Matrix &Uprime,
                     const Matrix &SUprime);

// max_{x≠0} ‖T x‖_{S_ran} / ‖x‖_{S_dom}.
double op_norm(const Matrix &T, const Matrix &S_dom, const Matrix &S_ran);

// Euclidean spectral norm.
double spectral_norm(const Matrix &T);

}  // namespace linalg

}  // namespace gapcheck

#endif  // GAPCHECK_LINALG_HPP

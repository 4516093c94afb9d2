// Copyright the gapcheck authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef GAPCHECK_FRAME_HPP
#define GAPCHECK_FRAME_HPP

#include <memory>
#include <optional>
#include <vector>
#include <Eigen/Cholesky>
#include <Eigen/SparseCore>
#include "gapcheck/linalg.hpp"

namespace gapcheck
{

//
// Galerkin framework for the semidefinite eigenproblem a(u, u') = λ⟨u, u'⟩. Every coarse
// space is represented through its embedding into a fixed fine reference space, which
// stands in for the continuous space in all "exact" quantities (kernel, complement,
// projector, solution operator).
//

struct Tolerances
{
  // Relative nullspace cut for the (A, S) pencil.
  double kernel = 1e-10;
  // Relative defect allowed between coarse forms and restricted reference forms.
  double consistency = 1e-10;
  // Residual below which an operator counts as compatible.
  double compatible = 1e-8;
};

class FrameError : public linalg::LinalgError
{
public:
  using linalg::LinalgError::LinalgError;
};

// The restricted stiffness is singular on the complement, so the source problem has no
// unique solution there.
class FriedrichsError : public FrameError
{
public:
  using FrameError::FrameError;
};

class ConsistencyError : public FrameError
{
public:
  using FrameError::FrameError;
};

class EquivalenceError : public FrameError
{
public:
  using FrameError::FrameError;
};

// Mass form M (pivot inner product), stiffness form A (the semidefinite form) and the
// energy inner product S = M + A, all over one basis.
//
// Finite element Gram matrices are mostly zeros, so a sparse copy is kept alongside the
// dense one when that pays off; products with tall blocks go through it.
//
class FormPair
{
  using Sparse = Eigen::SparseMatrix<double>;
  Matrix m, a, s;
  std::shared_ptr<const Sparse> m_sparse, a_sparse;

public:
  FormPair() = default;
  FormPair(const Matrix &mass, const Matrix &stiffness);

  const Matrix &mass() const { return m; }
  const Matrix &stiffness() const { return a; }
  const Matrix &energy() const { return s; }
  Index order() const { return m.rows(); }

  Matrix mass_times(const Matrix &X) const;
  Matrix stiffness_times(const Matrix &X) const;
  Matrix energy_times(const Matrix &X) const;
};

// A coarse space together with its embedding into the reference space.
struct Discretization
{
  std::shared_ptr<const FormPair> reference;
  // Reference coordinates of the coarse basis, dim X_ref × dim X_n.
  Matrix embedding;
  FormPair forms;

  Index dim() const { return embedding.cols(); }

  // Coarse forms obtained by Galerkin restriction EᵀM_ref E, EᵀA_ref E.
  static Discretization restricted(std::shared_ptr<const FormPair> reference,
                                   Matrix embedding);

  // Coarse forms supplied separately; they must match the restriction to tolerance.
  static Discretization checked(std::shared_ptr<const FormPair> reference, Matrix embedding,
                                FormPair forms, double tol = 1e-10);
};

// Relative defect between the coarse forms and the restricted reference forms.
double consistency_defect(const Discretization &d);

// Coarse splitting X_n = V_n ⊕ W_n in coarse coordinates.
struct Splitting
{
  // S_n-orthonormal basis of the discrete kernel.
  Matrix kernel;
  // S_n-orthonormal basis of the M_n-orthogonal complement of the kernel.
  Matrix complement;
  bool degenerate = false;
};

// Reference splitting X_ref = V ⊕ W with cached products.
struct RefSplitting
{
  // Kernel basis, orthonormal in both S and M (the two agree on the kernel).
  Matrix kernel;
  // S-orthonormal complement basis.
  Matrix complement;
  // M-orthonormal basis of the same complement.
  Matrix complement_pivot;
  Matrix mass_kernel;           // M · kernel
  Matrix mass_complement;       // M · complement
  Matrix stiffness_complement;  // A · complement
  Matrix mass_pivot;            // M · complement_pivot
  Matrix kernel_gram;           // kernelᵀ M kernel
  Matrix complement_gram;       // complementᵀ M complement
  Matrix stiffness_gram;        // complementᵀ A complement
  // K_ref in the basis complement_pivot, the reference half of the solution operator error.
  Matrix solution_gram;
  bool degenerate = false;

  Index dim() const { return kernel.rows(); }

  // Applies the projector onto V along W to the columns of U.
  Matrix project(const Matrix &U) const;

  // Dense projector. Only intended for small reference spaces.
  Matrix projector() const;
};

Splitting split_discrete(const Discretization &d, const Tolerances &tol = {});
RefSplitting split_reference(const FormPair &forms, const Tolerances &tol = {});

// Solution operator of a(Ku, v) = ⟨u, v⟩ for v in the reference complement, applied to the
// columns of U, and as a dense matrix.
Matrix reference_solve(const RefSplitting &ref, const Matrix &U);
Matrix reference_solution_operator(const RefSplitting &ref);

// Coarse analogues, mapping reference vectors into E·V_n (reference coordinates).
Matrix discrete_solve(const Discretization &d, const Splitting &s, const Matrix &U);
Matrix energy_projection(const Discretization &d, const Splitting &s, const Matrix &U);

struct FriedrichsConstant
{
  enum class Status
  {
    Finite,
    Infinite,
    // Empty complement; the inequality holds trivially.
    Vacuous
  };
  double value = 0.0;
  Status status = Status::Finite;

  bool finite() const { return status != Status::Infinite; }
};

FriedrichsConstant df_constant(const Discretization &d, const Splitting &s,
                               const Tolerances &tol = {});
FriedrichsConstant odf_constant(const Discretization &d, const Splitting &s,
                                const RefSplitting &ref, const Tolerances &tol = {});
double energy_gap(const Discretization &d, const Splitting &s, const RefSplitting &ref);
double pivot_gap(const Discretization &d, const Splitting &s, const RefSplitting &ref);
double kernel_distance(const Discretization &d, const Splitting &s, const Matrix &samples);
double kernel_source_norm(const Discretization &d, const Splitting &s,
                          const RefSplitting &ref);
double solution_operator_error(const Discretization &d, const Splitting &s,
                               const RefSplitting &ref);
Vector discrete_eigenvalues(const Discretization &d, const Splitting &s, Index k);

// Linear map on reference coordinates stored as left · right. Operators whose range lies
// in a coarse space are cheap to hold and apply in this form.
struct FactoredMap
{
  Matrix left;
  Matrix right;

  Matrix apply(const Matrix &U) const { return left * (right * U); }
  Matrix dense() const { return left * right; }
  static FactoredMap from_dense(const Matrix &Q);
};

struct CompatibilityReport
{
  bool compatible = false;
  // Largest S-distance of Q w to E·W_n over the reference kernel basis.
  double residual_kernel = 0.0;
  // Largest relative S-distance of u − Q u to E·W_n over the coarse basis.
  double residual_space = 0.0;
};

struct CompatibleNorms
{
  double x_norm = 0.0;
  double an_epsilon = 0.0;
  double o_norm = 0.0;
};

CompatibilityReport check_compatible(const FactoredMap &Q, const Discretization &d,
                                     const Splitting &s, const RefSplitting &ref,
                                     const Tolerances &tol = {});
CompatibleNorms compatible_norms(const FactoredMap &Q, const Discretization &d,
                                 const RefSplitting &ref);

// The o_norm part of compatible_norms alone.
double pivot_norm(const FactoredMap &Q, const FormPair &forms);

// The energy projection as a map on reference coordinates.
FactoredMap energy_projection_map(const Discretization &d, const Splitting &s);

// Projector onto E·V_n along the reference kernel, composed with the M-orthogonal
// projector onto E·V_n ⊕ W. Throws when the two spaces are not transversal.
FactoredMap build_tame_operator(const Discretization &d, const Splitting &s,
                                const RefSplitting &ref, const Tolerances &tol = {});

struct EquivalenceBounds
{
  double mass_lower = 0.0, mass_upper = 0.0;
  double stiffness_lower = 0.0, stiffness_upper = 0.0;
  // Largest relative energy of the sharp stiffness on the base kernel.
  double kernel_residual = 0.0;
};

// Verifies c₁M ≼ M♯ ≼ c₂M and c₁A ≼ A♯ ≼ c₂A with a common kernel.
EquivalenceBounds check_equivalence(const FormPair &base, const RefSplitting &base_split,
                                    const FormPair &sharp, const Tolerances &tol = {});

// Same coarse space and embedding, forms replaced by restrictions of the sharp pair.
Discretization with_equivalent_forms(const Discretization &d,
                                     std::shared_ptr<const FormPair> sharp);
Discretization with_equivalent_forms(const Discretization &d, const Matrix &mass,
                                     const Matrix &stiffness, EquivalenceBounds *bounds,
                                     const Tolerances &tol = {});

struct DiagnosticsRow
{
  int level = 0;
  Index dim_space = 0, dim_kernel = 0, dim_complement = 0;
  FriedrichsConstant df, odf;
  double gap_energy = 0.0;
  double gap_pivot = 0.0;
  double kernel_distance = 0.0;
  double kernel_source_norm = 0.0;
  double solution_error = 0.0;
  Vector eigenvalues;
};

//
// Per-level products shared by the diagnostics. Building one costs a few dense products
// with the reference Gram matrices; every diagnostic afterwards works on blocks of size
// dim V_n or dim W_ref.
//
class LevelOperators
{
  const Discretization &d;
  const Splitting &s;
  Tolerances tol;
  Matrix image;        // E·V_n
  Matrix mass_image;   // M_ref·E·V_n
  Matrix stiff_image;  // A_ref·E·V_n
  Matrix stiff_restricted, mass_restricted;
  Matrix pivot_coords;  // (V_nᵀM_nV_n)^{-1/2}, coefficients of an M-orthonormal basis
  std::optional<Eigen::LLT<Matrix>> stiff_factor;
  Vector eigs;

public:
  LevelOperators(const Discretization &d, const Splitting &s, const Tolerances &tol = {});

  const Discretization &discretization() const { return d; }
  const Splitting &splitting() const { return s; }
  const Matrix &complement_image() const { return image; }
  const Matrix &mass_complement_image() const { return mass_image; }
  const Matrix &stiffness_complement_image() const { return stiff_image; }

  // Eigenvalues of the restricted pencil (V_nᵀA_nV_n, V_nᵀM_nV_n), ascending.
  const Vector &restricted_eigenvalues() const { return eigs; }

  // Coefficients c with (V_nᵀA_nV_n) c = rhs. Throws FriedrichsError when singular.
  Matrix solve_restricted(const Matrix &rhs, std::string_view op) const;

  Matrix solve(const Matrix &U) const;
  Matrix project(const Matrix &U) const;

  FriedrichsConstant df() const;
  FriedrichsConstant odf(const RefSplitting &ref) const;
  double gap_energy(const RefSplitting &ref) const;
  double gap_pivot(const RefSplitting &ref) const;
  double kernel_distance(const Matrix &samples) const;
  double kernel_source_norm(const RefSplitting &ref) const;
  double solution_error(const RefSplitting &ref) const;
  Vector eigenvalues(Index k) const;
  FactoredMap projection_map() const;
  FactoredMap tame_operator(const RefSplitting &ref) const;
};

DiagnosticsRow diagnose(const Discretization &d, const Splitting &s, const RefSplitting &ref,
                        const Matrix &kernel_samples, Index num_eigs, int level,
                        const Tolerances &tol = {});
DiagnosticsRow diagnose(const LevelOperators &ops, const RefSplitting &ref,
                        const Matrix &kernel_samples, Index num_eigs, int level);

}  // namespace gapcheck

#endif  // GAPCHECK_FRAME_HPP

// Copyright the gapcheck authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "gapcheck/frame.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <Eigen/QR>
#include <fmt/format.h>

namespace gapcheck
{

namespace
{

using Sparse = Eigen::SparseMatrix<double>;

constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Below this fill ratio a sparse copy makes products with tall blocks cheaper.
constexpr double kSparseFill = 0.05;

std::shared_ptr<const Sparse> sparse_copy(const Matrix &X)
{
  if (X.rows() < 64)
  {
    return nullptr;
  }
  const Index nnz = (X.array() != 0.0).count();
  if (static_cast<double>(nnz) > kSparseFill * static_cast<double>(X.size()))
  {
    return nullptr;
  }
  return std::make_shared<const Sparse>(X.sparseView());
}

double max_abs(const Matrix &X)
{
  return X.size() == 0 ? 0.0 : X.cwiseAbs().maxCoeff();
}

// E·X for an embedding matrix that is usually very sparse.
Matrix embed(const Matrix &E, const Matrix &X)
{
  const Index nnz = (E.array() != 0.0).count();
  if (static_cast<double>(nnz) <= kSparseFill * static_cast<double>(E.size()))
  {
    const Sparse Es = E.sparseView();
    return Es * X;
  }
  return E * X;
}

// Eᵀ F E with F dense.
Matrix restrict_form(const Matrix &F, const Matrix &E)
{
  const Index nnz = (E.array() != 0.0).count();
  Matrix R;
  if (static_cast<double>(nnz) <= kSparseFill * static_cast<double>(E.size()))
  {
    const Sparse Es = E.sparseView();
    const Matrix FE = F * Es;
    R = Es.transpose() * FE;
  }
  else
  {
    R = E.transpose() * (F * E);
  }
  return 0.5 * (R + R.transpose());
}

// G^{-1/2} for a symmetric positive definite Gram matrix.
Matrix inverse_sqrt(const Matrix &G, std::string_view op)
{
  const linalg::EigenResult eig = linalg::symmetric_eigs(G);
  if (eig.values.size() > 0 && !(eig.values(0) > 0.0))
  {
    throw linalg::DefinitenessError(op, "Gram matrix is not positive definite");
  }
  const Vector w = eig.values.cwiseSqrt().cwiseInverse();
  return eig.vectors * w.asDiagonal() * eig.vectors.transpose();
}

// F with F Fᵀ = G for a symmetric positive semidefinite G (negative rounding is dropped).
Matrix psd_factor(const Matrix &G)
{
  const linalg::EigenResult eig = linalg::symmetric_eigs(G);
  const Vector w = eig.values.cwiseMax(0.0).cwiseSqrt();
  return eig.vectors * w.asDiagonal();
}

// max_x ‖left·right·x‖_G / ‖x‖_D where G is the range Gram matrix of the columns of left
// (passed as left_gram = leftᵀ G left) and D = L Lᵀ is given by its Cholesky factor.
double factored_norm(const Matrix &left_gram, const Matrix &right,
                     const Eigen::LLT<Matrix> &domain)
{
  if (right.size() == 0)
  {
    return 0.0;
  }
  const Matrix X = psd_factor(left_gram).transpose() * right;
  const Matrix Y = domain.matrixL().solve(X.transpose());
  return linalg::spectral_norm(Y);
}

Eigen::LLT<Matrix> cholesky(const Matrix &G, std::string_view op, std::string_view what)
{
  Eigen::LLT<Matrix> llt(G);
  if (llt.info() != Eigen::Success)
  {
    throw linalg::DefinitenessError(op, fmt::format("{} is not positive definite", what));
  }
  return llt;
}

}  // namespace

FormPair::FormPair(const Matrix &mass, const Matrix &stiffness)
{
  constexpr std::string_view op = "FormPair";
  linalg::require_square(mass, op);
  linalg::require_square(stiffness, op);
  if (mass.rows() != stiffness.rows())
  {
    throw linalg::ShapeError(op, fmt::format("mass order {} differs from stiffness order {}",
                                             mass.rows(), stiffness.rows()));
  }
  linalg::require_finite(mass, op);
  linalg::require_finite(stiffness, op);
  const double scale = std::max(max_abs(mass), max_abs(stiffness));
  if (max_abs(mass - mass.transpose()) > 1e-10 * scale ||
      max_abs(stiffness - stiffness.transpose()) > 1e-10 * scale)
  {
    throw linalg::ShapeError(op, "forms must be symmetric");
  }
  m = 0.5 * (mass + mass.transpose());
  a = 0.5 * (stiffness + stiffness.transpose());
  if (m.rows() > 0)
  {
    cholesky(m, op, "mass matrix");
    if (a.diagonal().minCoeff() < -1e-12 * scale)
    {
      throw linalg::DefinitenessError(op, "stiffness matrix has a negative diagonal entry");
    }
  }
  s = m + a;
  m_sparse = sparse_copy(m);
  a_sparse = sparse_copy(a);
}

Matrix FormPair::mass_times(const Matrix &X) const
{
  return m_sparse ? Matrix(*m_sparse * X) : Matrix(m * X);
}

Matrix FormPair::stiffness_times(const Matrix &X) const
{
  return a_sparse ? Matrix(*a_sparse * X) : Matrix(a * X);
}

Matrix FormPair::energy_times(const Matrix &X) const
{
  if (m_sparse && a_sparse)
  {
    return *m_sparse * X + *a_sparse * X;
  }
  return s * X;
}

Discretization Discretization::restricted(std::shared_ptr<const FormPair> reference,
                                          Matrix embedding)
{
  if (!reference || embedding.rows() != reference->order())
  {
    throw linalg::ShapeError("Discretization", "embedding rows must match reference order");
  }
  Discretization d;
  d.forms = FormPair(restrict_form(reference->mass(), embedding),
                     restrict_form(reference->stiffness(), embedding));
  d.reference = std::move(reference);
  d.embedding = std::move(embedding);
  return d;
}

Discretization Discretization::checked(std::shared_ptr<const FormPair> reference,
                                       Matrix embedding, FormPair forms, double tol)
{
  if (!reference || embedding.rows() != reference->order() ||
      embedding.cols() != forms.order())
  {
    throw linalg::ShapeError("Discretization", "embedding shape does not match the forms");
  }
  Discretization d{std::move(reference), std::move(embedding), std::move(forms)};
  const double defect = consistency_defect(d);
  if (!(defect <= tol))
  {
    throw ConsistencyError("Discretization",
                           fmt::format("coarse forms differ from the restricted reference "
                                       "forms (relative defect {:.3e})",
                                       defect));
  }
  return d;
}

double consistency_defect(const Discretization &d)
{
  const double scale = std::max(max_abs(d.forms.energy()), 1e-300);
  const double dm = max_abs(restrict_form(d.reference->mass(), d.embedding) - d.forms.mass());
  const double da =
      max_abs(restrict_form(d.reference->stiffness(), d.embedding) - d.forms.stiffness());
  return std::max(dm, da) / scale;
}

Splitting split_discrete(const Discretization &d, const Tolerances &tol)
{
  linalg::KernelSplit ks =
      linalg::nullspace_gram(d.forms.stiffness(), d.forms.energy(), tol.kernel);
  return {std::move(ks.kernel), std::move(ks.complement), ks.degenerate};
}

RefSplitting split_reference(const FormPair &forms, const Tolerances &tol)
{
  linalg::KernelSplit ks =
      linalg::nullspace_gram(forms.stiffness(), forms.energy(), tol.kernel);
  RefSplitting ref;
  ref.kernel = std::move(ks.kernel);
  ref.complement = std::move(ks.complement);
  ref.degenerate = ks.degenerate;
  ref.complement_pivot = linalg::orthonormalize(ref.complement, forms.mass());
  ref.mass_kernel = forms.mass_times(ref.kernel);
  ref.mass_complement = forms.mass_times(ref.complement);
  ref.stiffness_complement = forms.stiffness_times(ref.complement);
  ref.mass_pivot = forms.mass_times(ref.complement_pivot);
  ref.kernel_gram = ref.kernel.transpose() * ref.mass_kernel;
  ref.kernel_gram = 0.5 * (ref.kernel_gram + ref.kernel_gram.transpose());
  ref.complement_gram = ref.complement.transpose() * ref.mass_complement;
  ref.complement_gram = 0.5 * (ref.complement_gram + ref.complement_gram.transpose());
  ref.stiffness_gram = ref.complement.transpose() * ref.stiffness_complement;
  ref.stiffness_gram = 0.5 * (ref.stiffness_gram + ref.stiffness_gram.transpose());
  if (ref.complement.cols() > 0)
  {
    const Eigen::LLT<Matrix> llt =
        cholesky(ref.stiffness_gram, "split_reference", "reference stiffness");
    const Matrix X =
        llt.matrixL().solve(ref.mass_complement.transpose() * ref.complement_pivot);
    ref.solution_gram = X.transpose() * X;
  }
  return ref;
}

Matrix RefSplitting::project(const Matrix &U) const
{
  // P = V Vᵀ S for an S-orthonormal V.
  return complement * ((mass_complement + stiffness_complement).transpose() * U);
}

Matrix RefSplitting::projector() const
{
  return complement * (mass_complement + stiffness_complement).transpose();
}

Matrix reference_solve(const RefSplitting &ref, const Matrix &U)
{
  constexpr std::string_view op = "reference_solve";
  if (U.rows() != ref.dim())
  {
    throw linalg::ShapeError(op, "vector length does not match the reference space");
  }
  if (ref.complement.cols() == 0)
  {
    return Matrix::Zero(U.rows(), U.cols());
  }
  Eigen::LLT<Matrix> llt(ref.stiffness_gram);
  if (llt.info() != Eigen::Success)
  {
    throw FriedrichsError(op, "stiffness restricted to the reference complement is singular");
  }
  return ref.complement * llt.solve(ref.mass_complement.transpose() * U);
}

Matrix reference_solution_operator(const RefSplitting &ref)
{
  return reference_solve(ref, Matrix::Identity(ref.dim(), ref.dim()));
}

LevelOperators::LevelOperators(const Discretization &d, const Splitting &s,
                               const Tolerances &tol)
  : d(d), s(s), tol(tol)
{
  const Matrix &V = s.complement;
  image = embed(d.embedding, V);
  mass_image = d.reference->mass_times(image);
  stiff_image = d.reference->stiffness_times(image);
  stiff_restricted = V.transpose() * (d.forms.stiffness() * V);
  stiff_restricted = 0.5 * (stiff_restricted + stiff_restricted.transpose());
  mass_restricted = V.transpose() * (d.forms.mass() * V);
  mass_restricted = 0.5 * (mass_restricted + mass_restricted.transpose());
  eigs = linalg::generalized_eigenvalues(stiff_restricted, mass_restricted);
  if (V.cols() > 0)
  {
    pivot_coords = inverse_sqrt(mass_restricted, "level_operators");
  }
  if (eigs.size() > 0 && eigs(0) > tol.kernel * eigs(eigs.size() - 1))
  {
    stiff_factor.emplace(stiff_restricted);
    if (stiff_factor->info() != Eigen::Success)
    {
      stiff_factor.reset();
    }
  }
}

Matrix LevelOperators::solve_restricted(const Matrix &rhs, std::string_view op) const
{
  if (image.cols() == 0)
  {
    return Matrix::Zero(0, rhs.cols());
  }
  if (!stiff_factor)
  {
    throw FriedrichsError(op, "stiffness restricted to the discrete complement is singular");
  }
  return stiff_factor->solve(rhs);
}

Matrix LevelOperators::solve(const Matrix &U) const
{
  return image * solve_restricted(mass_image.transpose() * U, "discrete_solve");
}

Matrix LevelOperators::project(const Matrix &U) const
{
  return image * solve_restricted(stiff_image.transpose() * U, "energy_projection");
}

FriedrichsConstant LevelOperators::df() const
{
  using Status = FriedrichsConstant::Status;
  if (eigs.size() == 0)
  {
    return {0.0, Status::Vacuous};
  }
  const double lmin = eigs(0), lmax = eigs(eigs.size() - 1);
  if (!(lmin > tol.kernel * lmax))
  {
    return {kInfinity, Status::Infinite};
  }
  return {1.0 / lmin, Status::Finite};
}

FriedrichsConstant LevelOperators::odf(const RefSplitting &ref) const
{
  using Status = FriedrichsConstant::Status;
  if (image.cols() == 0)
  {
    return {1.0, Status::Vacuous};
  }
  // M-orthonormal basis of E·V_n, pushed through the projector; the smallest M-norm of the
  // image of a unit vector is the smallest singular value of P on E·V_n.
  // P = V_ref (S V_ref)ᵀ, so only the V_ref coefficients C of the image are needed.
  const Matrix C =
      ref.complement.cols() == 0
          ? Matrix(0, image.cols())
          : Matrix(((mass_image + stiff_image).transpose() * ref.complement).transpose() *
                   pivot_coords);
  const Matrix G = C.transpose() * (ref.complement_gram * C);
  const double smin2 = linalg::symmetric_eigenvalues(G)(0);
  // σ² below rounding level of the unit diagonal means P annihilates a direction.
  if (!(smin2 > 1e-14))
  {
    return {kInfinity, Status::Infinite};
  }
  return {1.0 / std::sqrt(smin2), Status::Finite};
}

double LevelOperators::gap_energy(const RefSplitting &ref) const
{
  if (image.cols() == 0)
  {
    return 0.0;
  }
  return linalg::principal_gap(image, mass_image + stiff_image, ref.complement,
                               ref.mass_complement + ref.stiffness_complement);
}

double LevelOperators::gap_pivot(const RefSplitting &ref) const
{
  if (image.cols() == 0)
  {
    return 0.0;
  }
  const Matrix &T = pivot_coords;
  return linalg::principal_gap(image * T, mass_image * T, ref.complement_pivot,
                               ref.mass_pivot);
}

double LevelOperators::kernel_distance(const Matrix &samples) const
{
  if (samples.cols() == 0)
  {
    return 0.0;
  }
  const Matrix Msamples = d.reference->mass_times(samples);
  const Vector norms = samples.cwiseProduct(Msamples).colwise().sum().cwiseSqrt();
  Matrix R = samples, MR = Msamples;
  if (s.kernel.cols() > 0)
  {
    Matrix gram = s.kernel.transpose() * (d.forms.mass() * s.kernel);
    const Matrix Z = embed(d.embedding, s.kernel * inverse_sqrt(gram, "kernel_distance"));
    const Matrix MZ = d.reference->mass_times(Z);
    const Matrix C = MZ.transpose() * samples;
    R -= Z * C;
    MR -= MZ * C;
  }
  const Vector dist = R.cwiseProduct(MR).colwise().sum().cwiseMax(0.0).cwiseSqrt();
  double worst = 0.0;
  for (Index j = 0; j < samples.cols(); ++j)
  {
    if (norms(j) > 0.0)
    {
      worst = std::max(worst, dist(j) / norms(j));
    }
  }
  return worst;
}

double LevelOperators::kernel_source_norm(const RefSplitting &ref) const
{
  if (image.cols() == 0 || ref.kernel.cols() == 0)
  {
    return 0.0;
  }
  // Columns of the kernel basis are M-orthonormal, so the domain is Euclidean; the range
  // metric on coefficients is V_nᵀ S_n V_n.
  const Matrix T = solve_restricted(mass_image.transpose() * ref.kernel, "kernel_source_norm");
  const Matrix range = stiff_restricted + mass_restricted;
  const Eigen::LLT<Matrix> llt = cholesky(range, "kernel_source_norm", "energy Gram matrix");
  return linalg::spectral_norm(llt.matrixU() * T);
}

double LevelOperators::solution_error(const RefSplitting &ref) const
{
  constexpr std::string_view op = "solution_operator_error";
  // In the M-orthonormal reference basis [V_ref, W_ref] the difference K_ref − K_n reads
  // diag(K_VV, 0) − CᵀΛ_n⁻¹C with C = (E·V_n)ᵀM[V_ref, W_ref]. Its range lies in V_ref plus
  // the span of C_Wᵀ, which a Householder QR captures without forming Gram matrices of
  // nearly dependent blocks.
  const Index nr = ref.complement.cols(), nv = image.cols(), nw = ref.kernel.cols();
  if (nv > 0 && !stiff_factor)
  {
    throw FriedrichsError(op, "stiffness restricted to the discrete complement is singular");
  }
  Matrix basis_kernel(nw, 0);
  Matrix cross_kernel(nv, 0);
  if (nw > 0 && nv > 0)
  {
    const Matrix CW = mass_image.transpose() * ref.kernel;
    const Eigen::HouseholderQR<Matrix> qr(CW.transpose());
    const Index q = std::min(nw, nv);
    basis_kernel = qr.householderQ() * Matrix::Identity(nw, q);
    cross_kernel = CW * basis_kernel;
  }
  const Index m = nr + basis_kernel.cols();
  if (m == 0)
  {
    return 0.0;
  }
  Matrix H = Matrix::Zero(m, m);
  if (nr > 0)
  {
    H.topLeftCorner(nr, nr) = ref.solution_gram;
  }
  if (nv > 0)
  {
    Matrix C(nv, m);
    C << mass_image.transpose() * ref.complement_pivot, cross_kernel;
    const Matrix Z = stiff_factor->matrixL().solve(C);
    H.noalias() -= Z.transpose() * Z;
  }
  const Vector w = linalg::symmetric_eigenvalues(H);
  return std::max(std::abs(w(0)), std::abs(w(w.size() - 1)));
}

Vector LevelOperators::eigenvalues(Index k) const
{
  return eigs.head(std::min<Index>(k, eigs.size()));
}

FactoredMap LevelOperators::projection_map() const
{
  return {image, solve_restricted(stiff_image.transpose(), "energy_projection_map")};
}

FactoredMap LevelOperators::tame_operator(const RefSplitting &ref) const
{
  constexpr std::string_view op = "build_tame_operator";
  if (!odf(ref).finite())
  {
    throw FrameError(op, "discrete complement meets the reference kernel; no tame operator");
  }
  const Index nv = image.cols();
  if (nv == 0)
  {
    return {image, Matrix::Zero(0, ref.dim())};
  }
  // First block row of (BᵀMB)⁻¹BᵀM for B = [E·V_n, W_ref], via the Schur complement on
  // the kernel block.
  const Matrix &W = ref.kernel;
  Matrix rows = mass_image.transpose();
  Matrix schur = image.transpose() * mass_image;
  if (W.cols() > 0)
  {
    const Eigen::LLT<Matrix> llt = cholesky(ref.kernel_gram, op, "kernel Gram matrix");
    const Matrix cross = mass_image.transpose() * W;  // nv × nw
    const Matrix coupling = llt.solve(cross.transpose()).transpose();
    schur -= coupling * cross.transpose();
    rows -= coupling * ref.mass_kernel.transpose();
  }
  schur = 0.5 * (schur + schur.transpose());
  Eigen::LLT<Matrix> sllt(schur);
  if (sllt.info() != Eigen::Success)
  {
    throw FrameError(op, "discrete complement and reference kernel are not transversal");
  }
  return {image, sllt.solve(rows)};
}

FriedrichsConstant df_constant(const Discretization &d, const Splitting &s,
                               const Tolerances &tol)
{
  return LevelOperators(d, s, tol).df();
}

FriedrichsConstant odf_constant(const Discretization &d, const Splitting &s,
                                const RefSplitting &ref, const Tolerances &tol)
{
  return LevelOperators(d, s, tol).odf(ref);
}

double energy_gap(const Discretization &d, const Splitting &s, const RefSplitting &ref)
{
  return LevelOperators(d, s).gap_energy(ref);
}

double pivot_gap(const Discretization &d, const Splitting &s, const RefSplitting &ref)
{
  return LevelOperators(d, s).gap_pivot(ref);
}

double kernel_distance(const Discretization &d, const Splitting &s, const Matrix &samples)
{
  return LevelOperators(d, s).kernel_distance(samples);
}

double kernel_source_norm(const Discretization &d, const Splitting &s, const RefSplitting &ref)
{
  return LevelOperators(d, s).kernel_source_norm(ref);
}

double solution_operator_error(const Discretization &d, const Splitting &s,
                               const RefSplitting &ref)
{
  return LevelOperators(d, s).solution_error(ref);
}

Vector discrete_eigenvalues(const Discretization &d, const Splitting &s, Index k)
{
  return LevelOperators(d, s).eigenvalues(k);
}

Matrix discrete_solve(const Discretization &d, const Splitting &s, const Matrix &U)
{
  return LevelOperators(d, s).solve(U);
}

Matrix energy_projection(const Discretization &d, const Splitting &s, const Matrix &U)
{
  return LevelOperators(d, s).project(U);
}

FactoredMap energy_projection_map(const Discretization &d, const Splitting &s)
{
  return LevelOperators(d, s).projection_map();
}

FactoredMap build_tame_operator(const Discretization &d, const Splitting &s,
                                const RefSplitting &ref, const Tolerances &tol)
{
  return LevelOperators(d, s, tol).tame_operator(ref);
}

FactoredMap FactoredMap::from_dense(const Matrix &Q)
{
  return {Q, Matrix::Identity(Q.cols(), Q.cols())};
}

CompatibilityReport check_compatible(const FactoredMap &Q, const Discretization &d,
                                     const Splitting &s, const RefSplitting &ref,
                                     const Tolerances &tol)
{
  const FormPair &forms = *d.reference;
  const Matrix Z = embed(d.embedding, s.kernel);
  const Matrix SZ = forms.energy_times(Z);

  // S-distances of the columns of X to span Z (Z is S-orthonormal).
  auto distances = [&](const Matrix &X) -> Vector
  {
    Matrix R = X, SR = forms.energy_times(X);
    if (Z.cols() > 0)
    {
      const Matrix C = SZ.transpose() * X;
      R -= Z * C;
      SR -= SZ * C;
    }
    return R.cwiseProduct(SR).colwise().sum().cwiseMax(0.0).cwiseSqrt();
  };
  auto norms = [&](const Matrix &X) -> Vector
  {
    return X.cwiseProduct(forms.energy_times(X)).colwise().sum().cwiseSqrt();
  };

  CompatibilityReport out;
  if (ref.kernel.cols() > 0)
  {
    const Vector dist = distances(Q.apply(ref.kernel));
    const Vector den = norms(ref.kernel);
    out.residual_kernel = (dist.array() / den.array()).maxCoeff();
  }
  if (d.dim() > 0)
  {
    const Vector dist = distances(d.embedding - Q.apply(d.embedding));
    const Vector den = norms(d.embedding);
    out.residual_space = (dist.array() / den.array()).maxCoeff();
  }
  out.compatible =
      out.residual_kernel <= tol.compatible && out.residual_space <= tol.compatible;
  return out;
}

CompatibleNorms compatible_norms(const FactoredMap &Q, const Discretization &d,
                                 const RefSplitting &ref)
{
  const FormPair &forms = *d.reference;
  CompatibleNorms out;
  {
    const Eigen::LLT<Matrix> dom = cholesky(forms.energy(), "compatible_norms", "energy");
    const Matrix gram = Q.left.transpose() * forms.energy_times(Q.left);
    out.x_norm = factored_norm(gram, Q.right, dom);
  }
  out.o_norm = pivot_norm(Q, forms);
  const Index nr = ref.complement.cols();
  if (nr > 0)
  {
    // (I − Q) on the S-orthonormal complement basis, measured in M. The difference is
    // formed explicitly so that a small defect is not lost to cancellation.
    const Matrix Z = ref.complement - Q.apply(ref.complement);
    const Matrix gram = Z.transpose() * forms.mass_times(Z);
    out.an_epsilon = std::sqrt(std::max(0.0, linalg::largest_eigenvalue(gram)));
  }
  return out;
}

double pivot_norm(const FactoredMap &Q, const FormPair &forms)
{
  const Eigen::LLT<Matrix> dom = cholesky(forms.mass(), "pivot_norm", "mass");
  const Matrix gram = Q.left.transpose() * forms.mass_times(Q.left);
  return factored_norm(gram, Q.right, dom);
}

EquivalenceBounds check_equivalence(const FormPair &base, const RefSplitting &base_split,
                                    const FormPair &sharp, const Tolerances &tol)
{
  constexpr std::string_view op = "sharp_transform";
  if (base.order() != sharp.order())
  {
    throw linalg::ShapeError(op, "sharp forms live on a different space");
  }
  EquivalenceBounds b;
  const Vector mw = linalg::generalized_eigenvalues(sharp.mass(), base.mass());
  b.mass_lower = mw(0);
  b.mass_upper = mw(mw.size() - 1);
  if (!(b.mass_lower > 0.0))
  {
    throw EquivalenceError(op, fmt::format("mass forms are not equivalent (extreme "
                                           "generalized eigenvalue {:.6e})",
                                           b.mass_lower));
  }
  const Matrix &V = base_split.complement;
  const Matrix &W = base_split.kernel;
  if (V.cols() == 0)
  {
    if (sharp.stiffness().cwiseAbs().maxCoeff() > 0.0)
    {
      throw EquivalenceError(op, "base stiffness vanishes but the sharp one does not");
    }
    return b;
  }
  Matrix sharp_v = V.transpose() * sharp.stiffness_times(V);
  Matrix base_v = V.transpose() * base_split.stiffness_complement;
  const Vector aw = linalg::generalized_eigenvalues(0.5 * (sharp_v + sharp_v.transpose()),
                                                    0.5 * (base_v + base_v.transpose()));
  b.stiffness_lower = aw(0);
  b.stiffness_upper = aw(aw.size() - 1);
  const double top = linalg::largest_eigenvalue(sharp_v);
  if (W.cols() > 0)
  {
    const Matrix sharp_w = W.transpose() * sharp.stiffness_times(W);
    b.kernel_residual = std::max(linalg::largest_eigenvalue(sharp_w), 0.0) / top;
  }
  if (b.kernel_residual > tol.kernel)
  {
    throw EquivalenceError(op, fmt::format("sharp stiffness does not vanish on the base "
                                           "kernel (relative energy {:.6e})",
                                           b.kernel_residual));
  }
  if (!(b.stiffness_lower > tol.kernel))
  {
    throw EquivalenceError(op, fmt::format("stiffness forms are not equivalent (extreme "
                                           "generalized eigenvalue {:.6e})",
                                           b.stiffness_lower));
  }
  return b;
}

Discretization with_equivalent_forms(const Discretization &d,
                                     std::shared_ptr<const FormPair> sharp)
{
  return Discretization::restricted(std::move(sharp), d.embedding);
}

Discretization with_equivalent_forms(const Discretization &d, const Matrix &mass,
                                     const Matrix &stiffness, EquivalenceBounds *bounds,
                                     const Tolerances &tol)
{
  auto sharp = std::make_shared<const FormPair>(mass, stiffness);
  const RefSplitting base = split_reference(*d.reference, tol);
  const EquivalenceBounds b = check_equivalence(*d.reference, base, *sharp, tol);
  if (bounds)
  {
    *bounds = b;
  }
  return with_equivalent_forms(d, std::move(sharp));
}

DiagnosticsRow diagnose(const Discretization &d, const Splitting &s, const RefSplitting &ref,
                        const Matrix &kernel_samples, Index num_eigs, int level,
                        const Tolerances &tol)
{
  return diagnose(LevelOperators(d, s, tol), ref, kernel_samples, num_eigs, level);
}

DiagnosticsRow diagnose(const LevelOperators &ops, const RefSplitting &ref,
                        const Matrix &kernel_samples, Index num_eigs, int level)
{
  const Discretization &d = ops.discretization();
  const Splitting &s = ops.splitting();
  DiagnosticsRow row;
  row.level = level;
  row.dim_space = d.dim();
  row.dim_kernel = s.kernel.cols();
  row.dim_complement = s.complement.cols();
  row.df = ops.df();
  row.odf = ops.odf(ref);
  row.gap_energy = ops.gap_energy(ref);
  row.gap_pivot = ops.gap_pivot(ref);
  row.kernel_distance = ops.kernel_distance(kernel_samples);
  if (row.df.finite())
  {
    row.kernel_source_norm = ops.kernel_source_norm(ref);
    row.solution_error = ops.solution_error(ref);
  }
  else
  {
    row.kernel_source_norm = kInfinity;
    row.solution_error = kInfinity;
  }
  row.eigenvalues = ops.eigenvalues(num_eigs);
  return row;
}

}  // namespace gapcheck

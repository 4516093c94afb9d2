// Copyright the gapcheck authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "gapcheck/synthetic.hpp"

#include <cmath>
#include <limits>
#include <fmt/format.h>

namespace gapcheck::synthetic
{

DiagonalModel::DiagonalModel(Vector eigenvalues, Index kernel_dim)
  : lambda(std::move(eigenvalues)), kernel_size(kernel_dim)
{
  if (lambda.size() == 0 || kernel_size < 0)
  {
    throw PreconditionError("diagonal model needs a positive truncation");
  }
  for (Index k = 0; k < lambda.size(); ++k)
  {
    if (!(lambda(k) > 0.0) || !std::isfinite(lambda(k)) ||
        (k > 0 && !(lambda(k) > lambda(k - 1))))
    {
      throw PreconditionError("eigenvalues must be positive and strictly increasing");
    }
  }
  const Index n = dim();
  Matrix A = Matrix::Zero(n, n);
  A.diagonal().head(lambda.size()) = lambda;
  pair = std::make_shared<const FormPair>(Matrix::Identity(n, n), A);
}

DiagonalModel DiagonalModel::quadratic(Index truncation, Index kernel_dim)
{
  Vector lambda(truncation);
  for (Index k = 0; k < truncation; ++k)
  {
    lambda(k) = static_cast<double>((k + 1) * (k + 1));
  }
  return DiagonalModel(std::move(lambda), kernel_dim < 0 ? truncation : kernel_dim);
}

Vector DiagonalModel::e(Index k) const
{
  if (k < 1 || k > truncation())
  {
    throw PreconditionError(
        fmt::format("direction e_{} lies outside the truncation N = {}", k, truncation()));
  }
  Vector x = Vector::Zero(dim());
  x(k - 1) = 1.0;
  return x;
}

Vector DiagonalModel::f(Index k) const
{
  if (k < 1 || k > kernel_size)
  {
    throw PreconditionError(fmt::format(
        "kernel direction f_{} lies outside the kernel truncation {}", k, kernel_size));
  }
  Vector x = Vector::Zero(dim());
  x(truncation() + k - 1) = 1.0;
  return x;
}

Matrix DiagonalModel::kernel_samples() const
{
  if (kernel_size == 0)
  {
    return Matrix(dim(), 0);
  }
  Matrix samples = Matrix::Zero(dim(), 2);
  samples.col(0) = f(1);
  for (Index k = 1; k <= kernel_size; ++k)
  {
    samples(truncation() + k - 1, 1) = 1.0 / static_cast<double>(k * k);
  }
  samples.col(1).normalize();
  return samples;
}

std::string_view to_string(CounterexampleKind kind)
{
  switch (kind)
  {
  case CounterexampleKind::AdkNotDf:
    return "adk-not-df";
  case CounterexampleKind::DfNotDc:
    return "df-not-dc";
  case CounterexampleKind::VgNotOdf:
    return "vg-not-odf";
  }
  return "unknown";
}

std::optional<CounterexampleKind> parse_counterexample(std::string_view name)
{
  for (auto kind : {CounterexampleKind::AdkNotDf, CounterexampleKind::DfNotDc,
                    CounterexampleKind::VgNotOdf})
  {
    if (name == to_string(kind))
    {
      return kind;
    }
  }
  return std::nullopt;
}

namespace
{

Matrix baseline_basis(const DiagonalModel &model, Index n)
{
  if (n < 1 || n > model.truncation())
  {
    throw PreconditionError(
        fmt::format("level {} is outside 1..{} (truncation)", n, model.truncation()));
  }
  const Index nk = std::min(n, model.kernel_dim());
  Matrix E = Matrix::Zero(model.dim(), n + nk);
  for (Index k = 1; k <= n; ++k)
  {
    E.col(k - 1) = model.e(k);
  }
  for (Index k = 1; k <= nk; ++k)
  {
    E.col(n + k - 1) = model.f(k);
  }
  return E;
}

// e_k scaled to unit energy norm.
Vector unit_energy(const DiagonalModel &model, Index k)
{
  return model.e(k) / std::sqrt(1.0 + model.eigenvalue(k));
}

Construction augment(const DiagonalModel &model, Index n, double kernel_weight_power)
{
  Construction c;
  const Index fresh = 2 * n;
  c.v = unit_energy(model, fresh);
  const double pivot_norm = c.v.norm();  // M = I
  c.w = std::pow(pivot_norm, kernel_weight_power) * model.f(fresh);
  c.u = c.v + c.w;
  Matrix E = baseline_basis(model, n);
  E.conservativeResize(Eigen::NoChange, E.cols() + 1);
  E.col(E.cols() - 1) = c.u;
  c.disc = Discretization::restricted(model.forms(), std::move(E));
  return c;
}

}  // namespace

Discretization baseline(const DiagonalModel &model, Index n)
{
  return Discretization::restricted(model.forms(), baseline_basis(model, n));
}

Construction perturb_adk_not_df(const DiagonalModel &model, Index n, std::optional<double> eps)
{
  Construction c;
  c.v = unit_energy(model, n);
  c.w = model.f(n + 1);
  const double pivot_norm = c.v.norm();
  c.eps = eps.value_or(pivot_norm * pivot_norm);
  const double inv_eps = std::isinf(c.eps) ? 0.0 : 1.0 / c.eps;
  if (!std::isinf(c.eps) && !(c.eps > 0.0 && c.eps < pivot_norm))
  {
    throw PreconditionError(fmt::format(
        "perturbation size {:.6e} must lie in (0, |v_n|) = (0, {:.6e})", c.eps, pivot_norm));
  }
  // Z_n = I − ε⁻¹ w vᵀ / |v| (M = I).
  Matrix E = baseline_basis(model, n);
  const Eigen::RowVectorXd coupling = (inv_eps / pivot_norm) * (c.v.transpose() * E);
  E -= c.w * coupling;
  c.disc = Discretization::restricted(model.forms(), std::move(E));
  return c;
}

Construction augment_df_not_dc(const DiagonalModel &model, Index n)
{
  return augment(model, n, 0.0);
}

Construction augment_vg_not_odf(const DiagonalModel &model, Index n)
{
  return augment(model, n, 0.5);
}

Construction counterexample(const DiagonalModel &model, CounterexampleKind kind, Index n)
{
  switch (kind)
  {
  case CounterexampleKind::AdkNotDf:
    return perturb_adk_not_df(model, n);
  case CounterexampleKind::DfNotDc:
    return augment_df_not_dc(model, n);
  case CounterexampleKind::VgNotOdf:
    return augment_vg_not_odf(model, n);
  }
  throw PreconditionError("unknown counterexample kind");
}

}  // namespace gapcheck::synthetic

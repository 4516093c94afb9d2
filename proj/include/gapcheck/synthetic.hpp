// Copyright the gapcheck authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef GAPCHECK_SYNTHETIC_HPP
#define GAPCHECK_SYNTHETIC_HPP

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include "gapcheck/frame.hpp"

namespace gapcheck::synthetic
{

class PreconditionError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

//
// Diagonal model: reference coordinates (e_1, …, e_N, f_1, …, f_K) with M = I,
// a(e_j, e_k) = λ_k δ_jk and a(f_j, ·) = 0. The complement is span{e_k}, the kernel
// span{f_k}, and λ_k → ∞ mimics a compact embedding of the complement.
//
class DiagonalModel
{
  Vector lambda;
  Index kernel_size;
  std::shared_ptr<const FormPair> pair;

public:
  DiagonalModel(Vector eigenvalues, Index kernel_dim);

  // λ_k = k², k = 1..N. A negative kernel_dim means kernel_dim = N.
  static DiagonalModel quadratic(Index truncation, Index kernel_dim = -1);

  Index truncation() const { return lambda.size(); }
  Index kernel_dim() const { return kernel_size; }
  Index dim() const { return lambda.size() + kernel_size; }
  const Vector &eigenvalues() const { return lambda; }
  double eigenvalue(Index k) const { return lambda(k - 1); }
  const std::shared_ptr<const FormPair> &forms() const { return pair; }

  // Unit coordinate vectors, 1-based.
  Vector e(Index k) const;
  Vector f(Index k) const;

  // f_1 and the normalized Σ f_k / k².
  Matrix kernel_samples() const;
};

enum class CounterexampleKind
{
  AdkNotDf,
  DfNotDc,
  VgNotOdf
};

std::string_view to_string(CounterexampleKind kind);
std::optional<CounterexampleKind> parse_counterexample(std::string_view name);

// A generated coarse space together with the vectors used to build it (reference
// coordinates; empty when a construction does not use them).
struct Construction
{
  Discretization disc;
  Vector v, w, u;
  double eps = 0.0;
};

// X_n = span{e_1..e_n, f_1..f_min(n,K)}.
Discretization baseline(const DiagonalModel &model, Index n);

// Z_n X_n with Z_n u = u − ε⁻¹⟨u, v⟩/|v| · w, v = e_n/‖e_n‖ and w = f_{n+1}. The default
// ε is |v|²; ε = +∞ gives the identity map.
Construction perturb_adk_not_df(const DiagonalModel &model, Index n,
                                std::optional<double> eps = std::nullopt);

// X_n ⊕ span{v + w} with v = e_{2n}/‖e_{2n}‖ and w = f_{2n}.
Construction augment_df_not_dc(const DiagonalModel &model, Index n);

// X_n ⊕ span{v + w} with v = e_{2n}/‖e_{2n}‖ and w = |v|^{1/2} f_{2n}.
Construction augment_vg_not_odf(const DiagonalModel &model, Index n);

Construction counterexample(const DiagonalModel &model, CounterexampleKind kind, Index n);

}  // namespace gapcheck::synthetic

#endif  // GAPCHECK_SYNTHETIC_HPP

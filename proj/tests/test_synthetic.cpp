// Copyright the gapcheck authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>
#include <doctest.h>
#include "gapcheck/frame.hpp"
#include "gapcheck/synthetic.hpp"

using namespace gapcheck;
using namespace gapcheck::synthetic;

namespace
{

const std::vector<Index> kLevels = {4, 8, 16, 32, 64};

DiagnosticsRow run(const DiagonalModel &model, const Discretization &d,
                   const RefSplitting &ref)
{
  const Splitting s = split_discrete(d);
  return diagnose(d, s, ref, model.kernel_samples(), 3, static_cast<int>(d.dim()));
}

}  // namespace

TEST_CASE("diagonal model layout")
{
  const DiagonalModel model = DiagonalModel::quadratic(6);
  CHECK(model.dim() == 12);
  CHECK(model.eigenvalue(3) == 9.0);
  CHECK(model.forms()->stiffness()(2, 2) == 9.0);
  CHECK(model.forms()->stiffness()(8, 8) == 0.0);
  CHECK(model.f(2)(7) == 1.0);
  CHECK_THROWS_AS(model.e(7), PreconditionError);
  CHECK_THROWS_AS(model.f(0), PreconditionError);
  CHECK_THROWS_AS(DiagonalModel(Vector::Constant(3, 1.0), 3), PreconditionError);
  CHECK_THROWS_AS(DiagonalModel(Vector::LinSpaced(3, 0.0, 2.0), 3), PreconditionError);

  const Matrix samples = model.kernel_samples();
  CHECK(samples.cols() == 2);
  CHECK(samples.col(1).norm() == doctest::Approx(1.0));
  CHECK(samples.topRows(6).norm() == 0.0);

  const RefSplitting ref = split_reference(*model.forms());
  CHECK(ref.kernel.cols() == 6);
  CHECK(ref.complement.cols() == 6);
}

TEST_CASE("counterexample names round trip")
{
  for (auto kind : {CounterexampleKind::AdkNotDf, CounterexampleKind::DfNotDc,
                    CounterexampleKind::VgNotOdf})
  {
    CHECK(parse_counterexample(to_string(kind)) == kind);
  }
  CHECK_FALSE(parse_counterexample("vg-not-dc").has_value());
}

TEST_CASE("baseline diagnostics are benign")
{
  const DiagonalModel model = DiagonalModel::quadratic(32);
  const RefSplitting ref = split_reference(*model.forms());
  for (Index n : {1, 2, 5, 8})
  {
    CAPTURE(n);
    const Discretization d = baseline(model, n);
    CHECK(consistency_defect(d) == 0.0);
    const Splitting s = split_discrete(d);
    CHECK(s.kernel.cols() == n);
    CHECK(s.complement.cols() == n);
    const DiagnosticsRow row = run(model, d, ref);
    CHECK(row.df.value == doctest::Approx(1.0).epsilon(1e-12));  // 1/λ₁
    CHECK(row.odf.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(row.gap_energy <= 1e-9);
    CHECK(row.gap_pivot <= 1e-9);
    CHECK(row.eigenvalues(0) == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(baseline(model, 0), PreconditionError);
  CHECK_THROWS_AS(baseline(model, 33), PreconditionError);
}

TEST_CASE("adk-not-df matches the closed form")
{
  const DiagonalModel model = DiagonalModel::quadratic(4 * kLevels.back());
  const RefSplitting ref = split_reference(*model.forms());
  const Matrix samples = model.kernel_samples();
  double last = 0.0;
  for (Index n : kLevels)
  {
    CAPTURE(n);
    const Construction c = perturb_adk_not_df(model, n);
    CHECK(consistency_defect(c.disc) == 0.0);
    const double lambda = model.eigenvalue(n);
    const double pivot2 = c.v.squaredNorm();
    const double energy = lambda * pivot2;  // a(v, v)
    CHECK(pivot2 == doctest::Approx(1.0 / (1.0 + lambda)));
    CHECK(c.eps == doctest::Approx(pivot2));

    const Splitting s = split_discrete(c.disc);
    const FriedrichsConstant df = df_constant(c.disc, s);
    const double closed = pivot2 * (1.0 + 1.0 / (c.eps * c.eps)) / energy;
    CHECK(std::abs(df.value - closed) <= 1e-8 * closed);
    last = df.value;

    // The kernel part and the stiffness are untouched by Z_n.
    const Discretization base = baseline(model, n);
    CHECK((c.disc.forms.stiffness() - base.forms.stiffness()).cwiseAbs().maxCoeff() <= 1e-10);
    const Splitting sb = split_discrete(base);
    CHECK(s.kernel.cols() == sb.kernel.cols());
    CHECK(std::abs(kernel_distance(c.disc, s, samples) - kernel_distance(base, sb, samples)) <=
          1e-10);
  }
  CHECK(last > 1e3);
}

TEST_CASE("identity perturbation reproduces the baseline")
{
  const DiagonalModel model = DiagonalModel::quadratic(32);
  const RefSplitting ref = split_reference(*model.forms());
  for (Index n : {2, 4, 8})
  {
    CAPTURE(n);
    const Construction c = perturb_adk_not_df(model, n, INFINITY);
    const Discretization base = baseline(model, n);
    CHECK(c.disc.embedding == base.embedding);
    const DiagnosticsRow a = run(model, c.disc, ref);
    const DiagnosticsRow b = run(model, base, ref);
    CHECK(a.df.value == b.df.value);
    CHECK(a.odf.value == b.odf.value);
    CHECK(a.gap_energy == b.gap_energy);
    CHECK(a.kernel_distance == b.kernel_distance);
    CHECK(a.solution_error == b.solution_error);
  }
}

TEST_CASE("adk-not-df preconditions")
{
  const DiagonalModel model = DiagonalModel::quadratic(16);
  const double pivot = 1.0 / std::sqrt(1.0 + model.eigenvalue(4));
  CHECK_THROWS_AS(perturb_adk_not_df(model, 4, pivot), PreconditionError);
  CHECK_THROWS_AS(perturb_adk_not_df(model, 4, 2.0 * pivot), PreconditionError);
  CHECK_THROWS_AS(perturb_adk_not_df(model, 4, 0.0), PreconditionError);
  CHECK_THROWS_AS(perturb_adk_not_df(model, 4, -1e-3), PreconditionError);
  CHECK_NOTHROW(perturb_adk_not_df(model, 4, 0.5 * pivot));
  // w = f_{n+1} needs a kernel direction beyond the baseline.
  CHECK_THROWS_AS(perturb_adk_not_df(DiagonalModel::quadratic(16, 4), 4), PreconditionError);
}

TEST_CASE("df-not-dc keeps df bounded with a persistent gap")
{
  const DiagonalModel model = DiagonalModel::quadratic(4 * kLevels.back());
  const RefSplitting ref = split_reference(*model.forms());
  double lo = INFINITY, hi = 0.0;
  for (Index n : kLevels)
  {
    CAPTURE(n);
    const Construction c = augment_df_not_dc(model, n);
    CHECK(consistency_defect(c.disc) == 0.0);
    CHECK(c.v.squaredNorm() + model.eigenvalue(2 * n) * c.v.squaredNorm() ==
          doctest::Approx(1.0));
    CHECK(c.w.norm() == doctest::Approx(1.0));
    const Splitting s = split_discrete(c.disc);
    CHECK(s.kernel.cols() == n);
    CHECK(s.complement.cols() == n + 1);
    const DiagnosticsRow row = run(model, c.disc, ref);
    CHECK(row.gap_energy >= 1.0 / std::sqrt(2.0) - 1e-9);
    CHECK(row.df.finite());
    lo = std::min(lo, row.df.value);
    hi = std::max(hi, row.df.value);
  }
  CHECK(hi < 2.0 * lo);
}

TEST_CASE("vg-not-odf follows the pivot ratio formula")
{
  const DiagonalModel model = DiagonalModel::quadratic(4 * kLevels.back());
  const RefSplitting ref = split_reference(*model.forms());
  double prev_gap = INFINITY, prev_odf = 0.0;
  for (Index n : kLevels)
  {
    CAPTURE(n);
    const Construction c = augment_vg_not_odf(model, n);
    CHECK(consistency_defect(c.disc) == 0.0);
    const double pv = c.v.norm();
    CHECK(c.w.norm() == doctest::Approx(std::sqrt(pv)));
    const Matrix Pu = ref.project(c.u);
    const double ratio = Pu.norm() / c.u.norm();
    CHECK(std::abs(ratio - 1.0 / std::sqrt(1.0 + 1.0 / pv)) <= 1e-10);

    const DiagnosticsRow row = run(model, c.disc, ref);
    // |u − Pu| = |w| bounds the energy distance of u/‖u‖ to the reference complement.
    CHECK(row.gap_energy <= std::sqrt(pv) + 1e-12);
    CHECK(row.gap_energy < prev_gap);
    CHECK(row.odf.value > prev_odf);
    CHECK(row.odf.value == doctest::Approx(1.0 / ratio).epsilon(1e-9));
    prev_gap = row.gap_energy;
    prev_odf = row.odf.value;
  }
  CHECK(prev_odf > 10.0);
}

TEST_CASE("counterexample dispatch")
{
  const DiagonalModel model = DiagonalModel::quadratic(16);
  CHECK(counterexample(model, CounterexampleKind::DfNotDc, 3).disc.embedding ==
        augment_df_not_dc(model, 3).disc.embedding);
  CHECK(counterexample(model, CounterexampleKind::VgNotOdf, 3).disc.embedding ==
        augment_vg_not_odf(model, 3).disc.embedding);
  CHECK(counterexample(model, CounterexampleKind::AdkNotDf, 3).disc.embedding ==
        perturb_adk_not_df(model, 3).disc.embedding);
  // The fresh direction 2n must exist in the truncation.
  CHECK_THROWS_AS(augment_df_not_dc(model, 9), PreconditionError);
}

TEST_CASE("finite kernel smoke test")
{
  const DiagonalModel model = DiagonalModel::quadratic(24, 3);
  const RefSplitting ref = split_reference(*model.forms());
  for (Index n : {2, 3, 6, 12})
  {
    CAPTURE(n);
    const Discretization d = baseline(model, n);
    const Splitting s = split_discrete(d);
    CHECK(s.kernel.cols() == std::min<Index>(n, 3));
    const DiagnosticsRow row = run(model, d, ref);
    CHECK(row.odf.finite());
    if (n >= 3)
    {
      CHECK(row.kernel_distance <= 1e-12);
    }
  }
  const DiagnosticsRow row =
      run(model, augment_vg_not_odf(DiagonalModel::quadratic(24), 6).disc,
          split_reference(*DiagonalModel::quadratic(24).forms()));
  CHECK(row.odf.finite());
}

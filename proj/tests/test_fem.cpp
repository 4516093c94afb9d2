// Copyright the gapcheck authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <sstream>
#include <doctest.h>
#include "gapcheck/fem.hpp"
#include "gapcheck/linalg.hpp"
#include "support.hpp"

using namespace gapcheck;
using namespace gapcheck::fem;
using gapcheck::testing::Generator;

namespace
{

constexpr double kPi = std::numbers::pi;

std::shared_ptr<const StructuredMesh> square(Index n)
{
  return std::make_shared<const StructuredMesh>(build_mesh(kPi, kPi, n));
}

// Coefficients of a constant field c in an edge, edge2 or nodal space.
Vector constant_field(const FemSpace &space, const Point &c)
{
  const StructuredMesh &mesh = *space.mesh;
  Vector x = Vector::Zero(space.dof_count);
  const auto set = [&](Index raw, double value)
  {
    if (space.dof_of_raw[raw] >= 0)
    {
      x(space.dof_of_raw[raw]) = value;
    }
  };
  if (space.kind == SpaceKind::Nodal)
  {
    for (Index v = 0; v < mesh.num_vertices(); ++v)
    {
      set(2 * v, c.x());
      set(2 * v + 1, c.y());
    }
    return x;
  }
  for (Index e = 0; e < mesh.num_edges(); ++e)
  {
    set(e, c.dot(mesh.vertices[mesh.edges[e][1]] - mesh.vertices[mesh.edges[e][0]]));
  }
  return x;
}

// Value of the P1 hat of vertex v of a structured mesh at point p.
double hat(const StructuredMesh &mesh, Index v, const Point &p)
{
  const auto &tri = mesh.triangles[mesh.locate(p)];
  Eigen::Matrix3d T;
  for (int i = 0; i < 3; ++i)
  {
    T.col(i) << mesh.vertices[tri[i]], 1.0;
  }
  const Eigen::Vector3d lambda = T.inverse() * Eigen::Vector3d(p.x(), p.y(), 1.0);
  for (int i = 0; i < 3; ++i)
  {
    if (tri[i] == v)
    {
      return lambda(i);
    }
  }
  return 0.0;
}

double max_abs(const Matrix &X)
{
  return X.size() == 0 ? 0.0 : X.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("mesh counts and topology")
{
  const StructuredMesh one = build_mesh(1.0, 1.0, 1);
  CHECK(one.num_triangles() == 2);
  CHECK(one.num_edges() == 5);
  CHECK(one.num_vertices() == 4);
  const StructuredMesh two = build_mesh(1.0, 2.0, 2);
  CHECK(two.num_triangles() == 8);
  CHECK(two.num_edges() == 16);
  CHECK(two.num_vertices() == 9);
  for (Index n = 1; n <= 8; ++n)
  {
    CAPTURE(n);
    const StructuredMesh mesh = build_mesh(kPi, 0.5 * kPi, n);
    CHECK(mesh.topology_valid());
    CHECK(mesh.num_edges() == 3 * n * n + 2 * n);
    Index boundary = 0;
    for (Index e = 0; e < mesh.num_edges(); ++e)
    {
      CHECK(mesh.edges[e][0] < mesh.edges[e][1]);
      boundary += mesh.boundary_edge[e] ? 1 : 0;
    }
    CHECK(boundary == 4 * n);
    for (Index t = 0; t < mesh.num_triangles(); ++t)
    {
      CHECK(mesh.area(t) == doctest::Approx(0.5 * kPi * kPi / (2.0 * n * n)));
    }
  }
  CHECK(two.edge_index(0, 1) == 0);
  CHECK_THROWS_AS(two.edge_index(0, 8), MeshError);
  CHECK_THROWS_AS(build_mesh(0.0, 1.0, 2), MeshError);
  CHECK_THROWS_AS(build_mesh(1.0, 1.0, 0), MeshError);
}

TEST_CASE("point location")
{
  const StructuredMesh mesh = build_mesh(2.0, 1.0, 2);
  CHECK(mesh.locate(Point(0.9, 0.1)) == 0);  // below the diagonal of the first cell
  CHECK(mesh.locate(Point(0.1, 0.4)) == 1);
  CHECK(mesh.locate(Point(1.9, 0.9)) == 6);
  CHECK(mesh.locate(Point(2.0, 1.0)) == 6);
  CHECK_THROWS_AS(mesh.locate(Point(2.5, 0.5)), MeshError);
}

TEST_CASE("mesh listing")
{
  const StructuredMesh mesh = build_mesh(1.0, 1.0, 1);
  std::ostringstream out;
  write_mesh(mesh, out);
  CHECK(out.str() == "vertices 4\n0 0 0\n1 1 0\n2 0 1\n3 1 1\n"
                     "edges 5\n0 0 1\n1 0 2\n2 0 3\n3 1 3\n4 2 3\n"
                     "triangles 2\n0 0 1 3\n1 0 3 2\n");
}

TEST_CASE("coefficients")
{
  const auto mesh = square(4);
  CHECK(check_coefficients(Coefficients::unit(), *mesh) == 1.0);
  CHECK(check_coefficients(Coefficients::smooth(), *mesh) >= 0.5);
  Coefficients bad = Coefficients::unit();
  bad.mu = [](const Point &x)
  {
    return x.x() - 1.0;
  };
  CHECK_THROWS_AS(check_coefficients(bad, *mesh), CoefficientError);
  const FemSpace space = make_space(mesh, SpaceKind::Edge, Boundary::Natural);
  CHECK_THROWS_AS(assemble(space, bad), CoefficientError);
}

TEST_CASE("space sizes")
{
  const auto mesh = square(4);
  const Index ne = mesh->num_edges(), nv = mesh->num_vertices();
  CHECK(make_space(mesh, SpaceKind::Edge, Boundary::Natural).dof_count == ne);
  CHECK(make_space(mesh, SpaceKind::Edge, Boundary::Essential).dof_count == ne - 16);
  CHECK(make_space(mesh, SpaceKind::Edge2, Boundary::Essential).dof_count == 2 * (ne - 16));
  CHECK(make_space(mesh, SpaceKind::Nodal, Boundary::Natural).dof_count == 2 * nv);
  // Interior vertices keep two unknowns, side vertices one, corners none.
  CHECK(make_space(mesh, SpaceKind::Nodal, Boundary::Essential).dof_count == 2 * 9 + 12);
  CHECK(parse_space_kind("edge2") == SpaceKind::Edge2);
  CHECK(parse_boundary("natural") == Boundary::Natural);
  CHECK_FALSE(parse_space_kind("raviart").has_value());
}

TEST_CASE("constant fields have no curl")
{
  const auto mesh = square(3);
  for (auto kind : {SpaceKind::Edge, SpaceKind::Edge2, SpaceKind::Nodal})
  {
    CAPTURE(to_string(kind));
    const FemSpace space = make_space(mesh, kind, Boundary::Natural);
    const SparseAssembly as = assemble_sparse(space, Coefficients::smooth());
    const Vector u = constant_field(space, Point(1.0, 0.0));
    CHECK((as.stiffness * u).cwiseAbs().maxCoeff() <= 1e-12);
    // |u|² = ∫ ε = π² + ½π ∫ sin = π² + π.
    CHECK(u.dot(as.mass * u) == doctest::Approx(kPi * kPi + kPi).epsilon(1e-2));
    const SparseAssembly unit = assemble_sparse(space, Coefficients::unit());
    CHECK(u.dot(unit.mass * u) == doctest::Approx(kPi * kPi).epsilon(1e-12));
  }
}

TEST_CASE("curl of a linear field")
{
  // u = (−y, x) has curl 2, so a(u, u) = 4 |Ω| for unit coefficients.
  const auto mesh = square(4);
  const FemSpace space = make_space(mesh, SpaceKind::Edge, Boundary::Natural);
  Vector u(space.dof_count);
  for (Index e = 0; e < mesh->num_edges(); ++e)
  {
    const Point &a = mesh->vertices[mesh->edges[e][0]], &b = mesh->vertices[mesh->edges[e][1]];
    const Point mid = 0.5 * (a + b);
    u(e) = Point(-mid.y(), mid.x()).dot(b - a);
  }
  const SparseAssembly as = assemble_sparse(space, Coefficients::unit());
  CHECK(u.dot(as.stiffness * u) == doctest::Approx(4.0 * kPi * kPi).epsilon(1e-12));
}

TEST_CASE("discrete gradient of a hat")
{
  const auto mesh = square(3);
  const FemSpace space = make_space(mesh, SpaceKind::Edge, Boundary::Essential);
  const Assembly as = assemble(space, Coefficients::unit());
  CHECK(as.gradient.cols() == 4);
  // The first interior vertex is (1, 1), index 5.
  const Vector g = as.gradient.col(0);
  Index nonzero = 0;
  for (Index e = 0; e < mesh->num_edges(); ++e)
  {
    const auto [a, b] = mesh->edges[e];
    const double expected = b == 5 ? 1.0 : (a == 5 ? -1.0 : 0.0);
    const Index dof = space.dof_of_raw[e];
    if (dof >= 0)
    {
      CHECK(g(dof) == expected);
      nonzero += expected != 0.0 ? 1 : 0;
    }
  }
  CHECK(nonzero == 6);
  CHECK(max_abs(as.forms.stiffness() * as.gradient) <= 1e-12);
}

TEST_CASE("edge kernels are discrete gradients")
{
  for (Index n : {2, 4})
  {
    const auto mesh = square(n);
    const Index nv = mesh->num_vertices(), ne = mesh->num_edges();
    const Index interior_v = (n - 1) * (n - 1), interior_e = ne - 4 * n;
    struct Case
    {
      SpaceKind kind;
      Boundary bc;
      Index kernel;
    };
    for (const Case &c : {Case{SpaceKind::Edge, Boundary::Essential, interior_v},
                          Case{SpaceKind::Edge, Boundary::Natural, nv - 1},
                          Case{SpaceKind::Edge2, Boundary::Essential, interior_v + interior_e},
                          Case{SpaceKind::Edge2, Boundary::Natural, nv + ne - 1}})
    {
      CAPTURE(n);
      CAPTURE(to_string(c.kind));
      CAPTURE(to_string(c.bc));
      const FemSpace space = make_space(mesh, c.kind, c.bc);
      const Assembly as = assemble(space, Coefficients::smooth());
      const linalg::KernelSplit ks =
          linalg::nullspace_gram(as.forms.stiffness(), as.forms.energy());
      CHECK(ks.kernel.cols() == c.kernel);
      CHECK(max_abs(as.forms.stiffness() * as.gradient) <= 1e-12);
      // range(G) = kernel, measured both ways in the energy norm.
      // Constants have no gradient, so one scalar unknown is redundant without conditions.
      const Index scalars = as.gradient.cols() - (c.bc == Boundary::Natural ? 1 : 0);
      const Matrix G =
          linalg::orthonormalize(as.gradient.rightCols(scalars), as.forms.energy(), 1e-6);
      CHECK(G.cols() == c.kernel);
      CHECK(linalg::principal_gap(ks.kernel, G, as.forms.energy()) <= 1e-9);
      CHECK(linalg::principal_gap(G, ks.kernel, as.forms.energy()) <= 1e-9);
    }
  }
}

TEST_CASE("refinement embeddings are consistent")
{
  Generator gen(31);
  struct Case
  {
    SpaceKind coarse, fine;
    Boundary bc_coarse, bc_fine;
  };
  for (const Case &c :
       {Case{SpaceKind::Edge, SpaceKind::Edge, Boundary::Essential, Boundary::Essential},
        Case{SpaceKind::Edge, SpaceKind::Edge2, Boundary::Natural, Boundary::Natural},
        Case{SpaceKind::Edge2, SpaceKind::Edge2, Boundary::Essential, Boundary::Essential},
        Case{SpaceKind::Nodal, SpaceKind::Nodal, Boundary::Natural, Boundary::Natural},
        Case{SpaceKind::Nodal, SpaceKind::Edge2, Boundary::Essential, Boundary::Essential},
        Case{SpaceKind::Edge, SpaceKind::Edge, Boundary::Essential, Boundary::Natural}})
  {
    CAPTURE(to_string(c.coarse));
    CAPTURE(to_string(c.fine));
    for (Index ratio : {2, 4})
    {
      CAPTURE(ratio);
      const FemSpace coarse = make_space(square(2), c.coarse, c.bc_coarse);
      const FemSpace fine = make_space(square(2 * ratio), c.fine, c.bc_fine);
      const Matrix E(refine_embed(coarse, fine));
      const Assembly ac = assemble(coarse, Coefficients::unit());
      const Assembly af = assemble(fine, Coefficients::unit());
      const double scale = max_abs(ac.forms.energy());
      CHECK(max_abs(E.transpose() * af.forms.mass() * E - ac.forms.mass()) <= 1e-10 * scale);
      CHECK(max_abs(E.transpose() * af.forms.stiffness() * E - ac.forms.stiffness()) <=
            1e-10 * scale);
      const Vector u = gen.vector(coarse.dof_count);
      const double coarse_energy = u.dot(ac.forms.energy() * u);
      const Vector Eu = E * u;
      CHECK(std::abs(Eu.dot(af.forms.energy() * Eu) - coarse_energy) <= 1e-10 * coarse_energy);
      if (c.bc_coarse == c.bc_fine && c.bc_coarse == Boundary::Natural)
      {
        const Vector cc = constant_field(coarse, Point(0.3, -1.0));
        const Vector cf = constant_field(fine, Point(0.3, -1.0));
        CHECK(max_abs(E * cc - cf) <= 1e-12);
      }
    }
  }
}

TEST_CASE("hat gradients embed to refined hat gradients")
{
  const FemSpace coarse = make_space(square(2), SpaceKind::Edge, Boundary::Essential);
  const FemSpace fine = make_space(square(4), SpaceKind::Edge, Boundary::Essential);
  const Matrix E(refine_embed(coarse, fine));
  const Assembly ac = assemble(coarse, Coefficients::unit());
  const Assembly af = assemble(fine, Coefficients::unit());
  // The only interior coarse vertex is (1, 1), index 4; interpolate its hat on the fine
  // interior vertices (3×3, row by row).
  Vector phi(9);
  Index k = 0;
  for (Index j = 1; j <= 3; ++j)
  {
    for (Index i = 1; i <= 3; ++i)
    {
      phi(k++) = hat(*coarse.mesh, 4, fine.mesh->vertices[j * 5 + i]);
    }
  }
  CHECK(max_abs(E * ac.gradient.col(0) - af.gradient * phi) <= 1e-12);
}

TEST_CASE("non-nested pairs are refused")
{
  const auto m2 = square(2);
  const auto m3 = square(3);
  const auto m4 = square(4);
  const auto r4 = std::make_shared<const StructuredMesh>(build_mesh(kPi, 1.0, 4));
  const auto space = [](auto mesh, SpaceKind kind, Boundary bc = Boundary::Essential)
  {
    return make_space(mesh, kind, bc);
  };
  CHECK_THROWS_AS(refine_embed(space(m2, SpaceKind::Edge), space(m3, SpaceKind::Edge)),
                  NestingError);
  CHECK_THROWS_AS(refine_embed(space(m2, SpaceKind::Edge), space(r4, SpaceKind::Edge)),
                  NestingError);
  CHECK_THROWS_AS(refine_embed(space(m2, SpaceKind::Edge2), space(m4, SpaceKind::Edge)),
                  NestingError);
  CHECK_THROWS_AS(refine_embed(space(m2, SpaceKind::Nodal), space(m4, SpaceKind::Edge)),
                  NestingError);
  CHECK_THROWS_AS(refine_embed(space(m2, SpaceKind::Edge), space(m4, SpaceKind::Nodal)),
                  NestingError);
  CHECK_THROWS_AS(
      refine_embed(space(m2, SpaceKind::Edge, Boundary::Natural), space(m4, SpaceKind::Edge)),
      NestingError);
}

TEST_CASE("analytic eigenvalues")
{
  const Vector sq = exact_eigenvalues(kPi, kPi, Boundary::Essential, 5);
  CHECK(sq.size() == 5);
  const double expected[] = {1, 1, 2, 4, 4};
  for (int i = 0; i < 5; ++i)
  {
    CHECK(sq(i) == doctest::Approx(expected[i]).epsilon(1e-14));
  }
  const Vector rect = exact_eigenvalues(kPi, 0.5 * kPi, Boundary::Essential, 6);
  const double rect_expected[] = {1, 4, 4, 5, 8, 9};  // m² + 4n²
  for (int i = 0; i < 6; ++i)
  {
    CHECK(rect(i) == doctest::Approx(rect_expected[i]).epsilon(1e-14));
  }
  const Vector nat = exact_eigenvalues(kPi, kPi, Boundary::Natural, 4);
  const double nat_expected[] = {2, 5, 5, 8};
  for (int i = 0; i < 4; ++i)
  {
    CHECK(nat(i) == doctest::Approx(nat_expected[i]).epsilon(1e-14));
  }
  CHECK(exact_eigenvalues(kPi, kPi, Boundary::Essential, 0).size() == 0);
  CHECK(exact_eigenvalues(1.0, 2.0, Boundary::Natural, 1)(0) ==
        doctest::Approx(kPi * kPi * 1.25));
}

TEST_CASE("edge eigenvalues approach the analytic values")
{
  const Vector exact = exact_eigenvalues(kPi, kPi, Boundary::Essential, 5);
  Vector previous = Vector::Constant(5, INFINITY);
  for (Index n : {4, 8, 16})
  {
    CAPTURE(n);
    const FemSpace space = make_space(square(n), SpaceKind::Edge, Boundary::Essential);
    const Assembly as = assemble(space, Coefficients::unit());
    const Index kernel = (n - 1) * (n - 1);
    const Vector w = linalg::generalized_eigenvalues(as.forms.stiffness(), as.forms.mass());
    CHECK(std::abs(w(kernel - 1)) <= 1e-9);
    const Vector err = (w.segment(kernel, 5) - exact).cwiseAbs();
    CHECK(err.maxCoeff() <= 0.1 * 4.0);
    CHECK((err.array() < previous.array()).all());
    previous = err;
  }
}

// Copyright the gapcheck authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include "gapcheck/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <fmt/format.h>
#include <fmt/ostream.h>

namespace gapcheck::fem
{

namespace
{

using Triplet = Eigen::Triplet<double>;

double cross(const Point &u, const Point &v)
{
  return u.x() * v.y() - u.y() * v.x();
}

// A P1 vector field on one triangle written as Σ λ_i c_i, with its (constant) curl.
struct LocalField
{
  Index raw = -1;
  std::array<Point, 3> coeff = {Point::Zero(), Point::Zero(), Point::Zero()};
  double curl = 0.0;

  Point value(const Eigen::Vector3d &lambda) const
  {
    return lambda(0) * coeff[0] + lambda(1) * coeff[1] + lambda(2) * coeff[2];
  }
};

struct Element
{
  std::array<Index, 3> vertices;
  std::array<Point, 3> points;
  std::array<Point, 3> grad;  // ∇λ_i
  double area = 0.0;

  Eigen::Vector3d barycentric(const Point &p) const
  {
    Eigen::Vector3d lambda;
    for (int i = 0; i < 3; ++i)
    {
      lambda(i) = grad[i].dot(p - points[(i + 1) % 3]);
    }
    return lambda;
  }
};

Element element(const StructuredMesh &mesh, Index t)
{
  Element el;
  el.vertices = mesh.triangles[t];
  for (int i = 0; i < 3; ++i)
  {
    el.points[i] = mesh.vertices[el.vertices[i]];
  }
  const double twice = cross(el.points[1] - el.points[0], el.points[2] - el.points[0]);
  if (!(twice > 0.0))
  {
    throw MeshError(fmt::format("triangle {} has non-positive area", t));
  }
  el.area = 0.5 * twice;
  for (int i = 0; i < 3; ++i)
  {
    // ∇λ_i is normal to the opposite edge and scaled so that λ_i(p_i) = 1.
    const Point d = el.points[(i + 2) % 3] - el.points[(i + 1) % 3];
    el.grad[i] = Point(-d.y(), d.x()) / twice;
  }
  return el;
}

// Basis functions supported on triangle t, with raw indices.
std::vector<LocalField> local_fields(const FemSpace &space, const Element &el, Index t)
{
  const StructuredMesh &mesh = *space.mesh;
  std::vector<LocalField> out;
  if (space.kind == SpaceKind::Nodal)
  {
    for (int i = 0; i < 3; ++i)
    {
      for (int c = 0; c < 2; ++c)
      {
        LocalField f;
        f.raw = 2 * el.vertices[i] + c;
        f.coeff[i] = c == 0 ? Point(1.0, 0.0) : Point(0.0, 1.0);
        f.curl = cross(el.grad[i], f.coeff[i]);
        out.push_back(f);
      }
    }
    return out;
  }
  for (int k = 0; k < 3; ++k)
  {
    const Index e = mesh.triangle_edges[t][k];
    // Local positions of the edge's start and end vertex.
    int ia = (k + 1) % 3, ib = (k + 2) % 3;
    if (el.vertices[ia] > el.vertices[ib])
    {
      std::swap(ia, ib);
    }
    LocalField w;  // λ_a∇λ_b − λ_b∇λ_a
    w.raw = e;
    w.coeff[ia] = el.grad[ib];
    w.coeff[ib] = -el.grad[ia];
    w.curl = 2.0 * cross(el.grad[ia], el.grad[ib]);
    out.push_back(w);
    if (space.kind == SpaceKind::Edge2)
    {
      LocalField g;  // ∇(λ_aλ_b)
      g.raw = mesh.num_edges() + e;
      g.coeff[ia] = el.grad[ib];
      g.coeff[ib] = el.grad[ia];
      out.push_back(g);
    }
  }
  return out;
}

const std::array<Eigen::Vector3d, 3> kMidpoints = {Eigen::Vector3d(0.0, 0.5, 0.5),
                                                   Eigen::Vector3d(0.5, 0.0, 0.5),
                                                   Eigen::Vector3d(0.5, 0.5, 0.0)};

Point physical(const Element &el, const Eigen::Vector3d &lambda)
{
  return lambda(0) * el.points[0] + lambda(1) * el.points[1] + lambda(2) * el.points[2];
}

bool on_vertical_side(const StructuredMesh &mesh, Index v)
{
  const Index i = v % (mesh.subdivisions + 1);
  return i == 0 || i == mesh.subdivisions;
}

bool on_horizontal_side(const StructuredMesh &mesh, Index v)
{
  const Index j = v / (mesh.subdivisions + 1);
  return j == 0 || j == mesh.subdivisions;
}

// Free scalar unknowns whose gradients span the discrete kernel: vertices (edge, edge2)
// and edges (edge2), interior only under essential conditions. Returns −1 for removed ones.
std::vector<Index> scalar_dofs(const FemSpace &space, Index &count)
{
  const StructuredMesh &mesh = *space.mesh;
  const Index nv = mesh.num_vertices();
  const Index raw = space.kind == SpaceKind::Edge2 ? nv + mesh.num_edges() : nv;
  std::vector<Index> map(raw, -1);
  count = 0;
  for (Index r = 0; r < raw; ++r)
  {
    const bool boundary =
        r < nv ? bool(mesh.boundary_vertex[r]) : bool(mesh.boundary_edge[r - nv]);
    if (space.bc == Boundary::Natural || !boundary)
    {
      map[r] = count++;
    }
  }
  return map;
}

}  // namespace

Index StructuredMesh::edge_index(Index u, Index v) const
{
  const std::array<Index, 2> key = {std::min(u, v), std::max(u, v)};
  const auto it = std::lower_bound(edges.begin(), edges.end(), key);
  if (it == edges.end() || *it != key)
  {
    throw MeshError(fmt::format("vertices {} and {} do not share an edge", u, v));
  }
  return static_cast<Index>(it - edges.begin());
}

double StructuredMesh::area(Index t) const
{
  const auto &tri = triangles[t];
  return 0.5 * cross(vertices[tri[1]] - vertices[tri[0]], vertices[tri[2]] - vertices[tri[0]]);
}

Index StructuredMesh::locate(const Point &p) const
{
  const double hx = width / static_cast<double>(subdivisions);
  const double hy = height / static_cast<double>(subdivisions);
  const double slack = 1e-12;
  if (!(p.x() >= -slack * width && p.x() <= (1.0 + slack) * width &&
        p.y() >= -slack * height && p.y() <= (1.0 + slack) * height))
  {
    throw MeshError(fmt::format("point ({}, {}) lies outside the mesh", p.x(), p.y()));
  }
  const auto cell = [&](double x, double h)
  {
    return std::clamp<Index>(static_cast<Index>(std::floor(x / h)), 0, subdivisions - 1);
  };
  const Index i = cell(p.x(), hx), j = cell(p.y(), hy);
  const double fx = p.x() / hx - static_cast<double>(i);
  const double fy = p.y() / hy - static_cast<double>(j);
  return 2 * (j * subdivisions + i) + (fy <= fx ? 0 : 1);
}

bool StructuredMesh::topology_valid() const
{
  if (num_vertices() - num_edges() + num_triangles() != 1)
  {
    return false;
  }
  std::vector<int> incident(edges.size(), 0);
  for (const auto &te : triangle_edges)
  {
    for (Index e : te)
    {
      ++incident[e];
    }
  }
  for (Index e = 0; e < num_edges(); ++e)
  {
    if (incident[e] != (boundary_edge[e] ? 1 : 2))
    {
      return false;
    }
  }
  return true;
}

StructuredMesh build_mesh(double a, double b, Index n)
{
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
  {
    throw MeshError(fmt::format("domain (0,{})x(0,{}) is degenerate", a, b));
  }
  if (n < 1)
  {
    throw MeshError(fmt::format("subdivision count {} must be positive", n));
  }
  StructuredMesh mesh;
  mesh.width = a;
  mesh.height = b;
  mesh.subdivisions = n;
  const auto vid = [n](Index i, Index j)
  {
    return j * (n + 1) + i;
  };
  for (Index j = 0; j <= n; ++j)
  {
    for (Index i = 0; i <= n; ++i)
    {
      mesh.vertices.emplace_back(a * static_cast<double>(i) / static_cast<double>(n),
                                 b * static_cast<double>(j) / static_cast<double>(n));
      mesh.boundary_vertex.push_back(i == 0 || i == n || j == 0 || j == n);
    }
  }
  for (Index j = 0; j < n; ++j)
  {
    for (Index i = 0; i < n; ++i)
    {
      const Index v00 = vid(i, j), v10 = vid(i + 1, j), v11 = vid(i + 1, j + 1),
                  v01 = vid(i, j + 1);
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  }
  for (const auto &t : mesh.triangles)
  {
    for (int k = 0; k < 3; ++k)
    {
      const Index u = t[(k + 1) % 3], v = t[(k + 2) % 3];
      mesh.edges.push_back({std::min(u, v), std::max(u, v)});
    }
  }
  std::sort(mesh.edges.begin(), mesh.edges.end());
  mesh.edges.erase(std::unique(mesh.edges.begin(), mesh.edges.end()), mesh.edges.end());
  for (const auto &t : mesh.triangles)
  {
    std::array<Index, 3> te;
    for (int k = 0; k < 3; ++k)
    {
      te[k] = mesh.edge_index(t[(k + 1) % 3], t[(k + 2) % 3]);
    }
    mesh.triangle_edges.push_back(te);
  }
  for (const auto &[u, v] : mesh.edges)
  {
    const bool vertical = (u % (n + 1)) == (v % (n + 1));
    const bool horizontal = (u / (n + 1)) == (v / (n + 1));
    mesh.boundary_edge.push_back((vertical && on_vertical_side(mesh, u)) ||
                                 (horizontal && on_horizontal_side(mesh, u)));
  }
  return mesh;
}

void write_mesh(const StructuredMesh &mesh, std::ostream &out)
{
  fmt::print(out, "vertices {}\n", mesh.num_vertices());
  for (Index v = 0; v < mesh.num_vertices(); ++v)
  {
    fmt::print(out, "{} {:.17g} {:.17g}\n", v, mesh.vertices[v].x(), mesh.vertices[v].y());
  }
  fmt::print(out, "edges {}\n", mesh.num_edges());
  for (Index e = 0; e < mesh.num_edges(); ++e)
  {
    fmt::print(out, "{} {} {}\n", e, mesh.edges[e][0], mesh.edges[e][1]);
  }
  fmt::print(out, "triangles {}\n", mesh.num_triangles());
  for (Index t = 0; t < mesh.num_triangles(); ++t)
  {
    const auto &tri = mesh.triangles[t];
    fmt::print(out, "{} {} {} {}\n", t, tri[0], tri[1], tri[2]);
  }
}

Coefficients Coefficients::unit()
{
  return {"unit", [](const Point &) { return 1.0; }, [](const Point &) { return 1.0; }};
}

Coefficients Coefficients::smooth()
{
  return {"smooth", [](const Point &x) { return 1.0 + 0.5 * std::sin(x.x()); },
          [](const Point &x) { return 1.0 + 0.5 * std::cos(x.y()); }};
}

double check_coefficients(const Coefficients &coeff, const StructuredMesh &mesh)
{
  if (!coeff.eps || !coeff.mu)
  {
    throw CoefficientError(fmt::format("coefficients '{}' are incomplete", coeff.name));
  }
  double lowest = INFINITY;
  for (Index t = 0; t < mesh.num_triangles(); ++t)
  {
    const Element el = element(mesh, t);
    for (const auto &q : kMidpoints)
    {
      const Point x = physical(el, q);
      for (double value : {coeff.eps(x), coeff.mu(x)})
      {
        if (!std::isfinite(value) || !(value > 0.0))
        {
          throw CoefficientError(fmt::format("coefficients '{}' take the value {} at ({}, {})",
                                             coeff.name, value, x.x(), x.y()));
        }
        lowest = std::min(lowest, value);
      }
    }
  }
  return lowest;
}

std::string_view to_string(SpaceKind kind)
{
  switch (kind)
  {
  case SpaceKind::Edge:
    return "edge";
  case SpaceKind::Edge2:
    return "edge2";
  case SpaceKind::Nodal:
    return "nodal";
  }
  return "unknown";
}

std::string_view to_string(Boundary bc)
{
  return bc == Boundary::Natural ? "natural" : "essential";
}

std::optional<SpaceKind> parse_space_kind(std::string_view name)
{
  for (auto kind : {SpaceKind::Edge, SpaceKind::Edge2, SpaceKind::Nodal})
  {
    if (name == to_string(kind))
    {
      return kind;
    }
  }
  return std::nullopt;
}

std::optional<Boundary> parse_boundary(std::string_view name)
{
  for (auto bc : {Boundary::Natural, Boundary::Essential})
  {
    if (name == to_string(bc))
    {
      return bc;
    }
  }
  return std::nullopt;
}

FemSpace make_space(std::shared_ptr<const StructuredMesh> mesh, SpaceKind kind, Boundary bc)
{
  if (!mesh)
  {
    throw MeshError("space needs a mesh");
  }
  FemSpace space;
  space.kind = kind;
  space.bc = bc;
  const bool essential = bc == Boundary::Essential;
  switch (kind)
  {
  case SpaceKind::Edge:
  case SpaceKind::Edge2:
  {
    const Index ne = mesh->num_edges();
    space.dof_of_raw.assign(kind == SpaceKind::Edge ? ne : 2 * ne, -1);
    for (Index r = 0; r < space.raw_count(); ++r)
    {
      if (!essential || !mesh->boundary_edge[r % ne])
      {
        space.dof_of_raw[r] = space.dof_count++;
      }
    }
    break;
  }
  case SpaceKind::Nodal:
  {
    space.dof_of_raw.assign(2 * mesh->num_vertices(), -1);
    for (Index r = 0; r < space.raw_count(); ++r)
    {
      const Index v = r / 2;
      // The tangential component on a vertical side is y, on a horizontal side x.
      const bool removed = essential && ((r % 2 == 1 && on_vertical_side(*mesh, v)) ||
                                         (r % 2 == 0 && on_horizontal_side(*mesh, v)));
      if (!removed)
      {
        space.dof_of_raw[r] = space.dof_count++;
      }
    }
    break;
  }
  }
  space.mesh = std::move(mesh);
  return space;
}

SparseAssembly assemble_sparse(const FemSpace &space, const Coefficients &coeff)
{
  const StructuredMesh &mesh = *space.mesh;
  check_coefficients(coeff, mesh);
  std::vector<Triplet> mt, at;
  for (Index t = 0; t < mesh.num_triangles(); ++t)
  {
    const Element el = element(mesh, t);
    const std::vector<LocalField> fields = local_fields(space, el, t);
    const double w = el.area / 3.0;
    double inv_mu = 0.0;
    std::array<double, 3> eps;
    std::vector<std::array<Point, 3>> values(fields.size());
    for (int q = 0; q < 3; ++q)
    {
      const Point x = physical(el, kMidpoints[q]);
      eps[q] = coeff.eps(x);
      inv_mu += w / coeff.mu(x);
      for (std::size_t i = 0; i < fields.size(); ++i)
      {
        values[i][q] = fields[i].value(kMidpoints[q]);
      }
    }
    for (std::size_t i = 0; i < fields.size(); ++i)
    {
      const Index row = space.dof_of_raw[fields[i].raw];
      if (row < 0)
      {
        continue;
      }
      for (std::size_t j = 0; j < fields.size(); ++j)
      {
        const Index col = space.dof_of_raw[fields[j].raw];
        if (col < 0)
        {
          continue;
        }
        double m = 0.0;
        for (int q = 0; q < 3; ++q)
        {
          m += w * eps[q] * values[i][q].dot(values[j][q]);
        }
        mt.emplace_back(row, col, m);
        const double a = inv_mu * fields[i].curl * fields[j].curl;
        if (a != 0.0)
        {
          at.emplace_back(row, col, a);
        }
      }
    }
  }
  SparseAssembly out;
  out.mass.resize(space.dof_count, space.dof_count);
  out.stiffness.resize(space.dof_count, space.dof_count);
  out.mass.setFromTriplets(mt.begin(), mt.end());
  out.stiffness.setFromTriplets(at.begin(), at.end());

  Index scalar_count = 0;
  std::vector<Triplet> gt;
  if (space.kind != SpaceKind::Nodal)
  {
    const std::vector<Index> scalar = scalar_dofs(space, scalar_count);
    const Index nv = mesh.num_vertices();
    for (Index e = 0; e < mesh.num_edges(); ++e)
    {
      const Index row = space.dof_of_raw[e];
      if (row < 0)
      {
        continue;
      }
      // The Whitney unknown of ∇φ is φ(end) − φ(start).
      for (const auto &[v, sign] :
           {std::pair{mesh.edges[e][0], -1.0}, std::pair{mesh.edges[e][1], 1.0}})
      {
        if (scalar[v] >= 0)
        {
          gt.emplace_back(row, scalar[v], sign);
        }
      }
      if (space.kind == SpaceKind::Edge2 && scalar[nv + e] >= 0)
      {
        gt.emplace_back(space.dof_of_raw[mesh.num_edges() + e], scalar[nv + e], 1.0);
      }
    }
  }
  out.gradient.resize(space.dof_count, scalar_count);
  out.gradient.setFromTriplets(gt.begin(), gt.end());
  return out;
}

Assembly assemble(const FemSpace &space, const Coefficients &coeff)
{
  const SparseAssembly s = assemble_sparse(space, coeff);
  return {FormPair(Matrix(s.mass), Matrix(s.stiffness)), Matrix(s.gradient)};
}

Vector scalar_interpolant(const FemSpace &space,
                          const std::function<double(const Point &)> &phi)
{
  if (space.kind == SpaceKind::Nodal)
  {
    throw std::invalid_argument("nodal spaces have no discrete gradient");
  }
  const StructuredMesh &mesh = *space.mesh;
  Index count = 0;
  const std::vector<Index> scalar = scalar_dofs(space, count);
  const Index nv = mesh.num_vertices();
  Vector c = Vector::Zero(count);
  for (Index r = 0; r < static_cast<Index>(scalar.size()); ++r)
  {
    if (scalar[r] < 0)
    {
      continue;
    }
    if (r < nv)
    {
      c(scalar[r]) = phi(mesh.vertices[r]);
      continue;
    }
    // λ_aλ_b is 1/4 at the edge midpoint.
    const auto [a, b] = mesh.edges[r - nv];
    const Point &pa = mesh.vertices[a], &pb = mesh.vertices[b];
    c(scalar[r]) = 4.0 * (phi(0.5 * (pa + pb)) - 0.5 * (phi(pa) + phi(pb)));
  }
  return c;
}

SparseMatrix refine_embed(const FemSpace &coarse, const FemSpace &fine)
{
  const StructuredMesh &cm = *coarse.mesh, &fm = *fine.mesh;
  if (std::abs(cm.width - fm.width) > 1e-12 * fm.width ||
      std::abs(cm.height - fm.height) > 1e-12 * fm.height)
  {
    throw NestingError("coarse and fine meshes cover different domains");
  }
  if (fm.subdivisions % cm.subdivisions != 0)
  {
    throw NestingError(fmt::format("mesh with N = {} is not a refinement of N = {}",
                                   fm.subdivisions, cm.subdivisions));
  }
  // Edge2 holds every piecewise linear field with a continuous tangential trace.
  if (coarse.kind != fine.kind && fine.kind != SpaceKind::Edge2)
  {
    throw NestingError(fmt::format("{} space is not contained in a {} space",
                                   to_string(coarse.kind), to_string(fine.kind)));
  }
  if (coarse.bc == Boundary::Natural && fine.bc == Boundary::Essential)
  {
    throw NestingError("a natural space is not contained in an essential one");
  }

  std::vector<Triplet> et;
  const auto add = [&](Index raw_fine, Index raw_coarse, double value)
  {
    const Index row = fine.dof_of_raw[raw_fine], col = coarse.dof_of_raw[raw_coarse];
    if (row >= 0 && col >= 0 && std::abs(value) > 1e-14)
    {
      et.emplace_back(row, col, value);
    }
  };

  if (fine.kind == SpaceKind::Nodal)
  {
    for (Index v = 0; v < fm.num_vertices(); ++v)
    {
      const Point &x = fm.vertices[v];
      const Index t = cm.locate(x);
      const Element el = element(cm, t);
      const Eigen::Vector3d lambda = el.barycentric(x);
      for (const LocalField &f : local_fields(coarse, el, t))
      {
        const Point u = f.value(lambda);
        add(2 * v, f.raw, u.x());
        add(2 * v + 1, f.raw, u.y());
      }
    }
  }
  else
  {
    // A P1 field has a linear tangential trace u_t on each edge of length ℓ; the Whitney
    // unknown is ℓ(u_t(a) + u_t(b))/2 and the bubble-gradient unknown ℓ(u_t(a) − u_t(b))/2.
    for (Index e = 0; e < fm.num_edges(); ++e)
    {
      const Point &pa = fm.vertices[fm.edges[e][0]], &pb = fm.vertices[fm.edges[e][1]];
      const double length = (pb - pa).norm();
      const Point tangent = (pb - pa) / length;
      const Index t = cm.locate(0.5 * (pa + pb));
      const Element el = element(cm, t);
      const Eigen::Vector3d la = el.barycentric(pa), lb = el.barycentric(pb);
      for (const LocalField &f : local_fields(coarse, el, t))
      {
        const double ua = f.value(la).dot(tangent), ub = f.value(lb).dot(tangent);
        add(e, f.raw, 0.5 * length * (ua + ub));
        if (fine.kind == SpaceKind::Edge2)
        {
          add(fm.num_edges() + e, f.raw, 0.5 * length * (ua - ub));
        }
      }
    }
  }
  SparseMatrix E(fine.dof_count, coarse.dof_count);
  E.setFromTriplets(et.begin(), et.end());
  return E;
}

Vector exact_eigenvalues(double a, double b, Boundary bc, Index k)
{
  if (!(a > 0.0) || !(b > 0.0))
  {
    throw MeshError(fmt::format("domain (0,{})x(0,{}) is degenerate", a, b));
  }
  if (k < 0)
  {
    throw std::invalid_argument("eigenvalue count must be non-negative");
  }
  const Index first = bc == Boundary::Natural ? 1 : 0;
  // Every value among the first k has m, n < first + k.
  std::vector<double> values;
  const double kx = std::numbers::pi / a, ky = std::numbers::pi / b;
  for (Index m = first; m < first + k; ++m)
  {
    for (Index n = first; n < first + k; ++n)
    {
      if (m + n >= 1)
      {
        values.push_back(std::pow(kx * m, 2) + std::pow(ky * n, 2));
      }
    }
  }
  std::sort(values.begin(), values.end());
  Vector out(k);
  for (Index i = 0; i < k; ++i)
  {
    out(i) = values[i];
  }
  return out;
}

}  // namespace gapcheck::fem

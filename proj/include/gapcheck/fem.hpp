// Copyright the gapcheck authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef GAPCHECK_FEM_HPP
#define GAPCHECK_FEM_HPP

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>
#include <Eigen/Dense>
#include <Eigen/Sparse>
#include "gapcheck/frame.hpp"

namespace gapcheck::fem
{

using SparseMatrix = Eigen::SparseMatrix<double>;
using Point = Eigen::Vector2d;

class MeshError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

class CoefficientError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

class NestingError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

//
// Uniform mesh of (0,a)×(0,b) with N×N squares, each cut by its SW-NE diagonal. Vertex
// (i, j) has index j(N+1)+i. Edges are stored with their lower vertex index first, which
// fixes their orientation, and are numbered in lexicographic order of that pair.
//
struct StructuredMesh
{
  double width = 0.0, height = 0.0;
  Index subdivisions = 0;
  std::vector<Point> vertices;
  std::vector<std::array<Index, 2>> edges;
  // Counter-clockwise (v00, v10, v11) and (v00, v11, v01).
  std::vector<std::array<Index, 3>> triangles;
  // Edges of each triangle, opposite to local vertex 0, 1, 2.
  std::vector<std::array<Index, 3>> triangle_edges;
  std::vector<bool> boundary_vertex, boundary_edge;

  Index num_vertices() const { return static_cast<Index>(vertices.size()); }
  Index num_edges() const { return static_cast<Index>(edges.size()); }
  Index num_triangles() const { return static_cast<Index>(triangles.size()); }

  Index edge_index(Index u, Index v) const;
  double area(Index t) const;

  // Triangle that contains p (points on shared edges resolve to either neighbor).
  Index locate(const Point &p) const;

  // V − E + T = 1 and each interior edge borders exactly two triangles.
  bool topology_valid() const;
};

StructuredMesh build_mesh(double a, double b, Index n);

// Plain-text listing with three sections, each introduced by a header line:
//   "vertices <count>" then "<index> <x> <y>"
//   "edges <count>" then "<index> <v0> <v1>" (oriented v0 → v1)
//   "triangles <count>" then "<index> <v0> <v1> <v2>" (counter-clockwise)
void write_mesh(const StructuredMesh &mesh, std::ostream &out);

struct Coefficients
{
  std::string name;
  std::function<double(const Point &)> eps, mu;

  static Coefficients unit();
  // ε = 1 + ½ sin x₁, μ = 1 + ½ cos x₂.
  static Coefficients smooth();
};

// Smallest of ε and μ over the quadrature points of the mesh. Throws CoefficientError when
// a sample is not finite or not positive.
double check_coefficients(const Coefficients &coeff, const StructuredMesh &mesh);

enum class SpaceKind
{
  // Lowest-order edge elements of the first kind (Whitney forms), one unknown per edge.
  Edge,
  // Full P1 edge elements of the second kind: the Whitney form and the gradient of the
  // quadratic edge bubble on every edge.
  Edge2,
  // Continuous piecewise linear vector fields, two unknowns per vertex.
  Nodal
};

enum class Boundary
{
  Natural,
  // Vanishing tangential trace.
  Essential
};

std::string_view to_string(SpaceKind kind);
std::string_view to_string(Boundary bc);
std::optional<SpaceKind> parse_space_kind(std::string_view name);
std::optional<Boundary> parse_boundary(std::string_view name);

//
// A finite element space on a mesh. Raw unknowns are numbered per kind (edge: e; edge2:
// Whitney e, bubble E + e; nodal: 2v for x, 2v + 1 for y); dof_of_raw maps them to the
// free unknowns or −1 when the boundary condition removes them.
//
struct FemSpace
{
  std::shared_ptr<const StructuredMesh> mesh;
  SpaceKind kind = SpaceKind::Edge;
  Boundary bc = Boundary::Essential;
  std::vector<Index> dof_of_raw;
  Index dof_count = 0;

  Index raw_count() const { return static_cast<Index>(dof_of_raw.size()); }
};

FemSpace make_space(std::shared_ptr<const StructuredMesh> mesh, SpaceKind kind, Boundary bc);

struct SparseAssembly
{
  SparseMatrix mass, stiffness;
  // Discrete gradient from the free scalar unknowns (P1 for edge, hierarchical P2 for
  // edge2) to the free field unknowns; no columns for nodal spaces.
  SparseMatrix gradient;
};

// M = ∫ ε u·u', A = ∫ μ⁻¹ curl u curl u' with the three-point edge-midpoint rule.
SparseAssembly assemble_sparse(const FemSpace &space, const Coefficients &coeff);

struct Assembly
{
  FormPair forms;
  Matrix gradient;
};

Assembly assemble(const FemSpace &space, const Coefficients &coeff);

// Coefficients of the interpolant of φ in the scalar space behind the discrete gradient
// (vertex values, plus edge-bubble weights for edge2), so that gradient · c is its gradient.
// Values on removed boundary unknowns are dropped.
Vector scalar_interpolant(const FemSpace &space,
                          const std::function<double(const Point &)> &phi);

// Exact inclusion of a coarse space into a space on a uniformly refined mesh of the same
// domain, written in the fine unknowns. Throws NestingError when the coarse space is not
// contained in the fine one.
SparseMatrix refine_embed(const FemSpace &coarse, const FemSpace &fine);

// Nonzero curl-curl eigenvalues of the rectangle, (mπ/a)² + (nπ/b)² with m, n ≥ 0 and
// m + n ≥ 1 (essential) or m, n ≥ 1 (natural), ascending with multiplicity.
Vector exact_eigenvalues(double a, double b, Boundary bc, Index k);

}  // namespace gapcheck::fem

#endif  // GAPCHECK_FEM_HPP

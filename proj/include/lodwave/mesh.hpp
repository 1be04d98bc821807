#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "lodwave/linalg.hpp"

namespace lodwave {

/// Which part of the boundary carries the homogeneous Dirichlet condition
/// Gamma; the remainder of the boundary is homogeneous Neumann.
enum class BoundarySpec {
  FullBoundary, ///< Gamma is the whole boundary
  LeftEdge,     ///< Gamma = { x on the boundary : x1 = 0 }
};

/// Uniform dyadic quadrilateral mesh of the unit square (0,1)^2 with
/// 2^level elements per side. Element (i,j) covers
/// [i*s,(i+1)*s] x [j*s,(j+1)*s] with s = 2^-level. Elements and vertices
/// are numbered lexicographically with the x-index running fastest, which
/// fixes all matrix orderings.
struct StructuredQuadMesh {
  int level = 0;
  int cells = 1; ///< elements per side, 2^level

  int n_elems() const { return cells * cells; }
  int n_verts() const { return (cells + 1) * (cells + 1); }
  double side() const { return 1.0 / static_cast<double>(cells); }
  /// Element diagonal; the mesh-size parameter H (resp. h) of the method.
  double mesh_size() const { return std::sqrt(2.0) / static_cast<double>(cells); }

  int elem_id(int i, int j) const { return j * cells + i; }
  int elem_i(int e) const { return e % cells; }
  int elem_j(int e) const { return e / cells; }
  int vertex_id(int i, int j) const { return j * (cells + 1) + i; }
  int vertex_i(int v) const { return v % (cells + 1); }
  int vertex_j(int v) const { return v / (cells + 1); }

  /// Corner vertices of an element in cyclic order SW, SE, NE, NW.
  std::array<int, 4> elem_corners(int e) const;
  std::array<double, 2> vertex_coords(int v) const;
  std::array<double, 2> elem_midpoint(int e) const;
};

/// Builds the level-`level` mesh. Levels above 12 are refused (the vertex
/// count grows as 4^level).
StructuredQuadMesh build_mesh(int level);

/// True if the vertex lies on the Dirichlet part Gamma.
bool on_gamma(const StructuredQuadMesh& mesh, int vertex, BoundarySpec bc);

/// All vertices not on Gamma, ascending. Vertices on the Neumann part of the
/// boundary are free.
std::vector<int> free_vertices(const StructuredQuadMesh& mesh, BoundarySpec bc);

/// Element patch N^l(T): T extended by `layers` rings of vertex-adjacent
/// elements, clipped at the domain boundary. On a structured mesh this is
/// always an axis-aligned block of elements.
struct Patch {
  int center_elem = 0;
  int layers = 0;
  int i0 = 0, i1 = 0, j0 = 0, j1 = 0; ///< inclusive element-index bounds
  std::vector<int> elems;             ///< element ids, ascending
  /// Fine vertices strictly inside the patch; see
  /// patch_interior_fine_vertices. Empty until explicitly filled.
  std::vector<int> interior_fine_dofs;

  bool covers(const StructuredQuadMesh& mesh) const {
    return static_cast<int>(elems.size()) == mesh.n_elems();
  }
};

Patch element_patch(const StructuredQuadMesh& mesh, int elem, int layers);

/// Vertices of `fine` lying in the patch but neither on the part of the
/// patch boundary interior to the domain nor on Gamma. Where the patch
/// boundary coincides with the Neumann part of the domain boundary the
/// vertices are kept (supported functions need not vanish there).
std::vector<int> patch_interior_fine_vertices(const StructuredQuadMesh& coarse,
                                              const StructuredQuadMesh& fine,
                                              const Patch& patch, BoundarySpec bc);

/// Fine elements covered by a coarse element (fine.level >= coarse.level).
std::vector<int> fine_elements_of_coarse(const StructuredQuadMesh& coarse,
                                         const StructuredQuadMesh& fine,
                                         int coarse_elem);

/// Nodal interpolation V_H -> V_h over all vertices: P * (coarse nodal
/// values) gives the fine nodal values of the same piecewise bilinear
/// function. Each row has at most 4 nonzeros summing to 1.
SpMat prolongation_matrix(const StructuredQuadMesh& coarse, const StructuredQuadMesh& fine);

} // namespace lodwave

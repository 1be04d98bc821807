#include "lodwave/mesh.hpp"

#include <algorithm>
#include <string>

#include "lodwave/errors.hpp"

namespace lodwave {

std::array<int, 4> StructuredQuadMesh::elem_corners(int e) const {
  const int i = elem_i(e);
  const int j = elem_j(e);
  return {vertex_id(i, j), vertex_id(i + 1, j), vertex_id(i + 1, j + 1),
          vertex_id(i, j + 1)};
}

std::array<double, 2> StructuredQuadMesh::vertex_coords(int v) const {
  const double s = side();
  return {vertex_i(v) * s, vertex_j(v) * s};
}

std::array<double, 2> StructuredQuadMesh::elem_midpoint(int e) const {
  const double s = side();
  return {(elem_i(e) + 0.5) * s, (elem_j(e) + 0.5) * s};
}

StructuredQuadMesh build_mesh(int level) {
  if (level < 0) throw ArgumentError("mesh level must be nonnegative");
  if (level > 12)
    throw CapacityError("mesh level " + std::to_string(level) +
                        " exceeds the supported maximum of 12");
  StructuredQuadMesh mesh;
  mesh.level = level;
  mesh.cells = 1 << level;
  return mesh;
}

namespace {

// Sides of the unit square; used to decide which parts of the boundary are
// Dirichlet under a given BoundarySpec.
enum Side { kLeft, kRight, kBottom, kTop };

bool side_is_dirichlet(BoundarySpec bc, Side side) {
  if (bc == BoundarySpec::FullBoundary) return true;
  return side == kLeft; // LeftEdge: Gamma = {x1 = 0}
}

} // namespace

bool on_gamma(const StructuredQuadMesh& mesh, int vertex, BoundarySpec bc) {
  const int i = mesh.vertex_i(vertex);
  const int j = mesh.vertex_j(vertex);
  const int n = mesh.cells;
  if (i == 0 && side_is_dirichlet(bc, kLeft)) return true;
  if (i == n && side_is_dirichlet(bc, kRight)) return true;
  if (j == 0 && side_is_dirichlet(bc, kBottom)) return true;
  if (j == n && side_is_dirichlet(bc, kTop)) return true;
  return false;
}

std::vector<int> free_vertices(const StructuredQuadMesh& mesh, BoundarySpec bc) {
  std::vector<int> free;
  free.reserve(mesh.n_verts());
  for (int v = 0; v < mesh.n_verts(); ++v)
    if (!on_gamma(mesh, v, bc)) free.push_back(v);
  return free;
}

Patch element_patch(const StructuredQuadMesh& mesh, int elem, int layers) {
  if (elem < 0 || elem >= mesh.n_elems())
    throw ArgumentError("element id out of range");
  if (layers < 0) throw ArgumentError("patch layers must be nonnegative");

  Patch patch;
  patch.center_elem = elem;
  patch.layers = layers;
  const int ti = mesh.elem_i(elem);
  const int tj = mesh.elem_j(elem);
  patch.i0 = std::max(0, ti - layers);
  patch.i1 = std::min(mesh.cells - 1, ti + layers);
  patch.j0 = std::max(0, tj - layers);
  patch.j1 = std::min(mesh.cells - 1, tj + layers);
  patch.elems.reserve((patch.i1 - patch.i0 + 1) * (patch.j1 - patch.j0 + 1));
  for (int j = patch.j0; j <= patch.j1; ++j)
    for (int i = patch.i0; i <= patch.i1; ++i)
      patch.elems.push_back(mesh.elem_id(i, j));
  return patch;
}

std::vector<int> patch_interior_fine_vertices(const StructuredQuadMesh& coarse,
                                              const StructuredQuadMesh& fine,
                                              const Patch& patch, BoundarySpec bc) {
  if (fine.level < coarse.level)
    throw ArgumentError("fine mesh must refine the coarse mesh");
  const int r = fine.cells / coarse.cells;

  // Fine-vertex index bounds of the closed patch block.
  const int lo_i = patch.i0 * r, hi_i = (patch.i1 + 1) * r;
  const int lo_j = patch.j0 * r, hi_j = (patch.j1 + 1) * r;

  // A patch side is "open" (its vertices admissible) only where it lies on
  // the Neumann part of the domain boundary.
  const bool open_left = patch.i0 == 0 && !side_is_dirichlet(bc, kLeft);
  const bool open_right = patch.i1 == coarse.cells - 1 && !side_is_dirichlet(bc, kRight);
  const bool open_bottom = patch.j0 == 0 && !side_is_dirichlet(bc, kBottom);
  const bool open_top = patch.j1 == coarse.cells - 1 && !side_is_dirichlet(bc, kTop);

  std::vector<int> dofs;
  for (int fj = lo_j; fj <= hi_j; ++fj) {
    if (fj == lo_j && !open_bottom) continue;
    if (fj == hi_j && !open_top) continue;
    for (int fi = lo_i; fi <= hi_i; ++fi) {
      if (fi == lo_i && !open_left) continue;
      if (fi == hi_i && !open_right) continue;
      dofs.push_back(fine.vertex_id(fi, fj));
    }
  }
  return dofs;
}

std::vector<int> fine_elements_of_coarse(const StructuredQuadMesh& coarse,
                                         const StructuredQuadMesh& fine,
                                         int coarse_elem) {
  if (fine.level < coarse.level)
    throw ArgumentError("fine mesh must refine the coarse mesh");
  const int r = fine.cells / coarse.cells;
  const int ci = coarse.elem_i(coarse_elem);
  const int cj = coarse.elem_j(coarse_elem);
  std::vector<int> elems;
  elems.reserve(r * r);
  for (int b = 0; b < r; ++b)
    for (int a = 0; a < r; ++a)
      elems.push_back(fine.elem_id(ci * r + a, cj * r + b));
  return elems;
}

SpMat prolongation_matrix(const StructuredQuadMesh& coarse, const StructuredQuadMesh& fine) {
  if (fine.level < coarse.level)
    throw ArgumentError("prolongation requires fine.level >= coarse.level");
  const int r = fine.cells / coarse.cells;

  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(fine.n_verts()) * 4);
  for (int fv = 0; fv < fine.n_verts(); ++fv) {
    const int fi = fine.vertex_i(fv);
    const int fj = fine.vertex_j(fv);
    const int ci = std::min(fi / r, coarse.cells - 1);
    const int cj = std::min(fj / r, coarse.cells - 1);
    const double xi = static_cast<double>(fi - ci * r) / r;
    const double eta = static_cast<double>(fj - cj * r) / r;
    const double w[4] = {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
    const int corner[4] = {coarse.vertex_id(ci, cj), coarse.vertex_id(ci + 1, cj),
                           coarse.vertex_id(ci + 1, cj + 1), coarse.vertex_id(ci, cj + 1)};
    for (int c = 0; c < 4; ++c)
      if (w[c] != 0.0) trips.emplace_back(fv, corner[c], w[c]);
  }
  SpMat P(fine.n_verts(), coarse.n_verts());
  P.setFromTriplets(trips.begin(), trips.end());
  P.makeCompressed();
  return P;
}

} // namespace lodwave

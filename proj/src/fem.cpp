#include "lodwave/fem.hpp"

#include <cmath>
#include <fstream>

#include "lodwave/errors.hpp"

namespace lodwave {

// Corner order SW, SE, NE, NW; exact integrals of bilinear shape functions.
const double kQ1Stiffness[4][4] = {
    {4.0 / 6, -1.0 / 6, -2.0 / 6, -1.0 / 6},
    {-1.0 / 6, 4.0 / 6, -1.0 / 6, -2.0 / 6},
    {-2.0 / 6, -1.0 / 6, 4.0 / 6, -1.0 / 6},
    {-1.0 / 6, -2.0 / 6, -1.0 / 6, 4.0 / 6},
};

const double kQ1Mass[4][4] = {
    {4.0 / 36, 2.0 / 36, 1.0 / 36, 2.0 / 36},
    {2.0 / 36, 4.0 / 36, 2.0 / 36, 1.0 / 36},
    {1.0 / 36, 2.0 / 36, 4.0 / 36, 2.0 / 36},
    {2.0 / 36, 1.0 / 36, 2.0 / 36, 4.0 / 36},
};

DofMap make_dof_map(const StructuredQuadMesh& mesh, BoundarySpec bc) {
  DofMap map;
  map.free_list = free_vertices(mesh, bc);
  map.vert_to_free.assign(mesh.n_verts(), -1);
  for (int k = 0; k < map.n_free(); ++k) map.vert_to_free[map.free_list[k]] = k;
  return map;
}

namespace {

void add_element_stiffness(const StructuredQuadMesh& mesh, int e, double coeff,
                           std::vector<Triplet>& trips) {
  const auto corners = mesh.elem_corners(e);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      trips.emplace_back(corners[a], corners[b], coeff * kQ1Stiffness[a][b]);
}

} // namespace

SpMat assemble_stiffness_full(const StructuredQuadMesh& mesh,
                              const std::vector<double>& coeff_values) {
  if (coeff_values.size() != static_cast<std::size_t>(mesh.n_elems()))
    throw ArgumentError("coefficient values not sampled on this mesh");
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(mesh.n_elems()) * 16);
  for (int e = 0; e < mesh.n_elems(); ++e)
    add_element_stiffness(mesh, e, coeff_values[e], trips);
  SpMat K(mesh.n_verts(), mesh.n_verts());
  K.setFromTriplets(trips.begin(), trips.end());
  K.makeCompressed();
  return K;
}

SpMat assemble_stiffness_subset_full(const StructuredQuadMesh& mesh,
                                     const std::vector<double>& coeff_values,
                                     const std::vector<int>& elems) {
  if (coeff_values.size() != static_cast<std::size_t>(mesh.n_elems()))
    throw ArgumentError("coefficient values not sampled on this mesh");
  std::vector<Triplet> trips;
  trips.reserve(elems.size() * 16);
  for (int e : elems) add_element_stiffness(mesh, e, coeff_values[e], trips);
  SpMat K(mesh.n_verts(), mesh.n_verts());
  K.setFromTriplets(trips.begin(), trips.end());
  K.makeCompressed();
  return K;
}

SpMat assemble_mass_full(const StructuredQuadMesh& mesh) {
  const double s2 = mesh.side() * mesh.side();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(mesh.n_elems()) * 16);
  for (int e = 0; e < mesh.n_elems(); ++e) {
    const auto corners = mesh.elem_corners(e);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        trips.emplace_back(corners[a], corners[b], s2 * kQ1Mass[a][b]);
  }
  SpMat M(mesh.n_verts(), mesh.n_verts());
  M.setFromTriplets(trips.begin(), trips.end());
  M.makeCompressed();
  return M;
}

SpMat lump_mass(const SpMat& mass) {
  const Vec row_sums = mass * Vec::Ones(mass.cols());
  SpMat lumped(mass.rows(), mass.cols());
  std::vector<Triplet> trips;
  trips.reserve(mass.rows());
  for (int i = 0; i < mass.rows(); ++i) trips.emplace_back(i, i, row_sums[i]);
  lumped.setFromTriplets(trips.begin(), trips.end());
  return lumped;
}

Vec assemble_load_full(const StructuredQuadMesh& mesh, const SpatialFn& f) {
  Vec b = Vec::Zero(mesh.n_verts());
  const double s = mesh.side();
  // 2x2 Gauss on [0,1]^2.
  const double g0 = 0.5 - 0.5 / std::sqrt(3.0);
  const double g1 = 0.5 + 0.5 / std::sqrt(3.0);
  const double gp[2] = {g0, g1};
  const double w = 0.25 * s * s;
  for (int e = 0; e < mesh.n_elems(); ++e) {
    const auto corners = mesh.elem_corners(e);
    const double x0 = mesh.elem_i(e) * s;
    const double y0 = mesh.elem_j(e) * s;
    for (double xi : gp)
      for (double eta : gp) {
        const double fv = f(x0 + xi * s, y0 + eta * s);
        const double shape[4] = {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta,
                                 (1 - xi) * eta};
        for (int c = 0; c < 4; ++c) b[corners[c]] += w * fv * shape[c];
      }
  }
  return b;
}

SpMat restrict_to_free(const SpMat& full, const DofMap& rows, const DofMap& cols) {
  std::vector<Triplet> trips;
  trips.reserve(full.nonZeros());
  for (int k = 0; k < full.outerSize(); ++k)
    for (SpMat::InnerIterator it(full, k); it; ++it) {
      const int r = rows.vert_to_free[it.row()];
      const int c = cols.vert_to_free[it.col()];
      if (r >= 0 && c >= 0) trips.emplace_back(r, c, it.value());
    }
  SpMat out(rows.n_free(), cols.n_free());
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

SpMat restrict_to_free(const SpMat& full, const DofMap& dofs) {
  return restrict_to_free(full, dofs, dofs);
}

Vec gather_free(const Vec& full, const DofMap& dofs) {
  Vec out(dofs.n_free());
  for (int k = 0; k < dofs.n_free(); ++k) out[k] = full[dofs.free_list[k]];
  return out;
}

Vec scatter_free(const Vec& free_values, const DofMap& dofs, int n_verts) {
  Vec out = Vec::Zero(n_verts);
  for (int k = 0; k < dofs.n_free(); ++k) out[dofs.free_list[k]] = free_values[k];
  return out;
}

SpMat assemble_stiffness(const StructuredQuadMesh& mesh,
                         const std::vector<double>& coeff_values, BoundarySpec bc) {
  return restrict_to_free(assemble_stiffness_full(mesh, coeff_values),
                          make_dof_map(mesh, bc));
}

SpMat assemble_mass(const StructuredQuadMesh& mesh, BoundarySpec bc) {
  return restrict_to_free(assemble_mass_full(mesh), make_dof_map(mesh, bc));
}

Vec assemble_load(const StructuredQuadMesh& mesh, BoundarySpec bc, const SpatialFn& f) {
  return gather_free(assemble_load_full(mesh, f), make_dof_map(mesh, bc));
}

SpMat assemble_element_restricted_stiffness(const StructuredQuadMesh& coarse,
                                            const StructuredQuadMesh& fine,
                                            const std::vector<double>& coeff_values,
                                            int coarse_elem) {
  return assemble_stiffness_subset_full(
      fine, coeff_values, fine_elements_of_coarse(coarse, fine, coarse_elem));
}

SpdSolver::SpdSolver(SpMat A, std::string name)
    : A_(std::move(A)), name_(std::move(name)) {
  A_.makeCompressed();
  ldlt_.compute(A_);
  if (ldlt_.info() != Eigen::Success)
    throw NumericError("factorization of " + name_ + " failed");
  if ((ldlt_.vectorD().array() <= 0.0).any())
    throw NumericError(name_ + " is not positive definite");
}

Vec SpdSolver::solve(const Vec& b) const {
  Vec x = ldlt_.solve(b);
  const double bnorm = b.norm();
  if (bnorm > 0) {
    const double rel = (A_ * x - b).norm() / bnorm;
    if (!(rel <= 1e-10))
      throw NumericError("solve with " + name_ + " missed the residual contract: " +
                         std::to_string(rel));
  }
  return x;
}

Vec solve_spd(const SpMat& A, const Vec& b) { return SpdSolver(A).solve(b); }

void write_matrix_market(const std::string& path, const SpMat& A) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open " + path + " for writing");
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
  out.precision(17);
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it)
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

} // namespace lodwave

#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "lodwave/linalg.hpp"
#include "lodwave/mesh.hpp"

namespace lodwave {

/// Free-vertex (non-Dirichlet) indexing for a (mesh, BoundarySpec) pair.
struct DofMap {
  std::vector<int> free_list;    ///< free vertex ids, ascending
  std::vector<int> vert_to_free; ///< per vertex: free index or -1 on Gamma

  int n_free() const { return static_cast<int>(free_list.size()); }
};

DofMap make_dof_map(const StructuredQuadMesh& mesh, BoundarySpec bc);

/// Q1 element matrices on a square of side s, corner order SW, SE, NE, NW.
/// The stiffness (unit coefficient) is scale invariant in 2D; the mass
/// scales with s^2. Both are exact integrals of the bilinear shape functions.
extern const double kQ1Stiffness[4][4];
extern const double kQ1Mass[4][4];

/// Stiffness of a(u,v) = int A grad u . grad v over all vertices, one
/// constant coefficient value per element.
SpMat assemble_stiffness_full(const StructuredQuadMesh& mesh,
                              const std::vector<double>& coeff_values);

/// Stiffness integrated only over the given elements (a restricted to a
/// subdomain). Summing over a partition of the mesh recovers the full matrix.
SpMat assemble_stiffness_subset_full(const StructuredQuadMesh& mesh,
                                     const std::vector<double>& coeff_values,
                                     const std::vector<int>& elems);

/// Consistent Q1 mass matrix over all vertices (exact integration).
SpMat assemble_mass_full(const StructuredQuadMesh& mesh);

/// Row-sum lumped version of the consistent mass (experimental).
SpMat lump_mass(const SpMat& mass);

using SpatialFn = std::function<double(double, double)>;

/// Load vector (f, phi_i) over all vertices via 2x2 Gauss quadrature per
/// element (exact for f piecewise biquadratic).
Vec assemble_load_full(const StructuredQuadMesh& mesh, const SpatialFn& f);

/// Restriction of a vertex-indexed matrix/vector to free dofs.
SpMat restrict_to_free(const SpMat& full, const DofMap& rows, const DofMap& cols);
SpMat restrict_to_free(const SpMat& full, const DofMap& dofs);
Vec gather_free(const Vec& full, const DofMap& dofs);
/// Extension by zero onto Gamma.
Vec scatter_free(const Vec& free_values, const DofMap& dofs, int n_verts);

/// Free-dof stiffness, mass and load for a given boundary spec.
SpMat assemble_stiffness(const StructuredQuadMesh& mesh,
                         const std::vector<double>& coeff_values, BoundarySpec bc);
SpMat assemble_mass(const StructuredQuadMesh& mesh, BoundarySpec bc);
Vec assemble_load(const StructuredQuadMesh& mesh, BoundarySpec bc, const SpatialFn& f);

/// Stiffness integrated over the fine elements covered by one coarse
/// element, on the full fine vertex set.
SpMat assemble_element_restricted_stiffness(const StructuredQuadMesh& coarse,
                                            const StructuredQuadMesh& fine,
                                            const std::vector<double>& coeff_values,
                                            int coarse_elem);

/// Sparse Cholesky-type (LDL^T) factorization of an SPD matrix, reusable
/// across many right-hand sides. Construction verifies positive definiteness;
/// every solve verifies the relative residual ||Ax-b||/||b|| <= 1e-10.
class SpdSolver {
public:
  explicit SpdSolver(SpMat A, std::string name = "matrix");

  Vec solve(const Vec& b) const;
  const SpMat& matrix() const { return A_; }
  int size() const { return static_cast<int>(A_.rows()); }

private:
  SpMat A_;
  std::string name_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
};

Vec solve_spd(const SpMat& A, const Vec& b);

/// MatrixMarket coordinate-format export (debugging aid).
void write_matrix_market(const std::string& path, const SpMat& A);

} // namespace lodwave

#pragma once

#include <vector>

#include "lodwave/fem.hpp"
#include "lodwave/linalg.hpp"
#include "lodwave/mesh.hpp"

namespace lodwave {

/// The quasi-interpolation I_H = E_H o Pi_H from fine to coarse Q1 functions,
/// as a matrix on free dofs. Projective: I_H applied to a prolongated coarse
/// function returns that function.
struct InterpolationOperator {
  int coarse_level = 0;
  int fine_level = 0;
  BoundarySpec bc = BoundarySpec::FullBoundary;
  SpMat matrix; ///< coarse free dofs x fine free dofs
};

/// Pi_H: per-coarse-element L2 projection onto Q1(T). Maps fine free-dof
/// vectors to element-corner coefficients of the (discontinuous) projection,
/// 4 per coarse element in order SW, SE, NE, NW, elements ascending.
SpMat piecewise_l2_projection(const StructuredQuadMesh& coarse,
                              const StructuredQuadMesh& fine, BoundarySpec bc);

/// E_H: vertex averaging from element-corner coefficients to coarse free
/// dofs. Each free vertex gets the arithmetic mean over its adjacent
/// elements; Dirichlet vertices are dropped (value 0).
SpMat averaging_operator(const StructuredQuadMesh& coarse, BoundarySpec bc);

InterpolationOperator build_IH(const StructuredQuadMesh& coarse,
                               const StructuredQuadMesh& fine, BoundarySpec bc);

/// Constraint system cutting out the fine-scale space W_h = Ker I_H,
/// optionally restricted to a set of fine free dofs (a patch interior).
/// Rows are the coarse free vertices whose I_H row meets those dofs.
struct ConstraintMatrix {
  SpMat C;               ///< rows x cols
  std::vector<int> rows; ///< coarse free-dof index per row
  std::vector<int> cols; ///< fine free-dof index per column
};

ConstraintMatrix kernel_constraint_matrix(const InterpolationOperator& op);
ConstraintMatrix kernel_constraint_matrix(const InterpolationOperator& op,
                                          const std::vector<int>& patch_free_dofs);

} // namespace lodwave

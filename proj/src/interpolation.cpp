#include "lodwave/interpolation.hpp"

#include <Eigen/Dense>

#include "lodwave/errors.hpp"

namespace lodwave {

namespace {

Eigen::Matrix4d q1_mass_matrix() {
  Eigen::Matrix4d g;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) g(a, b) = kQ1Mass[a][b];
  return g;
}

// Values of the four element-corner hats (SW, SE, NE, NW) at local (xi, eta).
std::array<double, 4> corner_shape(double xi, double eta) {
  return {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
}

} // namespace

SpMat piecewise_l2_projection(const StructuredQuadMesh& coarse,
                              const StructuredQuadMesh& fine, BoundarySpec bc) {
  if (fine.level < coarse.level)
    throw ArgumentError("piecewise_l2_projection requires fine.level >= coarse.level");
  const DofMap fine_dofs = make_dof_map(fine, bc);
  const int r = fine.cells / coarse.cells;
  const int n_local = (r + 1) * (r + 1);
  const double fine_area = fine.side() * fine.side();
  const double coarse_area = coarse.side() * coarse.side();

  // Element Gram matrix of the coarse Q1 basis and its inverse.
  const Eigen::Matrix4d g_inv = (coarse_area * q1_mass_matrix()).inverse();

  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(coarse.n_elems()) * 4 * n_local / 2);

  Eigen::MatrixXd rhs(4, n_local); // int_T Lambda_i phi_(p,q) per coarse element
  for (int T = 0; T < coarse.n_elems(); ++T) {
    rhs.setZero();
    const int ci = coarse.elem_i(T);
    const int cj = coarse.elem_j(T);
    for (int b = 0; b < r; ++b)
      for (int a = 0; a < r; ++a) {
        // Local fine vertices of fine element (a,b), order SW, SE, NE, NW.
        const int lv[4] = {b * (r + 1) + a, b * (r + 1) + a + 1,
                           (b + 1) * (r + 1) + a + 1, (b + 1) * (r + 1) + a};
        std::array<std::array<double, 4>, 4> lam; // lam[c] = coarse hats at corner c
        lam[0] = corner_shape(static_cast<double>(a) / r, static_cast<double>(b) / r);
        lam[1] = corner_shape(static_cast<double>(a + 1) / r, static_cast<double>(b) / r);
        lam[2] = corner_shape(static_cast<double>(a + 1) / r, static_cast<double>(b + 1) / r);
        lam[3] = corner_shape(static_cast<double>(a) / r, static_cast<double>(b + 1) / r);
        for (int c1 = 0; c1 < 4; ++c1)
          for (int c2 = 0; c2 < 4; ++c2) {
            const double m = fine_area * kQ1Mass[c1][c2];
            for (int i = 0; i < 4; ++i) rhs(i, lv[c2]) += lam[c1][i] * m;
          }
      }
    const Eigen::MatrixXd coeffs = g_inv * rhs;
    for (int q = 0; q <= r; ++q)
      for (int p = 0; p <= r; ++p) {
        const int fv = fine.vertex_id(ci * r + p, cj * r + q);
        const int col = fine_dofs.vert_to_free[fv];
        if (col < 0) continue; // fine function vanishes on Gamma
        for (int i = 0; i < 4; ++i) {
          const double v = coeffs(i, q * (r + 1) + p);
          if (v != 0.0) trips.emplace_back(4 * T + i, col, v);
        }
      }
  }

  SpMat pi(4 * coarse.n_elems(), fine_dofs.n_free());
  pi.setFromTriplets(trips.begin(), trips.end());
  pi.makeCompressed();
  return pi;
}

SpMat averaging_operator(const StructuredQuadMesh& coarse, BoundarySpec bc) {
  const DofMap coarse_dofs = make_dof_map(coarse, bc);

  std::vector<int> card(coarse.n_verts(), 0);
  for (int T = 0; T < coarse.n_elems(); ++T)
    for (int z : coarse.elem_corners(T)) ++card[z];

  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(coarse.n_elems()) * 4);
  for (int T = 0; T < coarse.n_elems(); ++T) {
    const auto corners = coarse.elem_corners(T);
    for (int i = 0; i < 4; ++i) {
      const int row = coarse_dofs.vert_to_free[corners[i]];
      if (row < 0) continue;
      trips.emplace_back(row, 4 * T + i, 1.0 / card[corners[i]]);
    }
  }
  SpMat e(coarse_dofs.n_free(), 4 * coarse.n_elems());
  e.setFromTriplets(trips.begin(), trips.end());
  e.makeCompressed();
  return e;
}

InterpolationOperator build_IH(const StructuredQuadMesh& coarse,
                               const StructuredQuadMesh& fine, BoundarySpec bc) {
  InterpolationOperator op;
  op.coarse_level = coarse.level;
  op.fine_level = fine.level;
  op.bc = bc;
  op.matrix = averaging_operator(coarse, bc) * piecewise_l2_projection(coarse, fine, bc);
  op.matrix.makeCompressed();
  return op;
}

ConstraintMatrix kernel_constraint_matrix(const InterpolationOperator& op) {
  ConstraintMatrix cm;
  cm.C = op.matrix;
  cm.rows.resize(op.matrix.rows());
  cm.cols.resize(op.matrix.cols());
  for (int i = 0; i < op.matrix.rows(); ++i) cm.rows[i] = i;
  for (int j = 0; j < op.matrix.cols(); ++j) cm.cols[j] = j;
  return cm;
}

ConstraintMatrix kernel_constraint_matrix(const InterpolationOperator& op,
                                          const std::vector<int>& patch_free_dofs) {
  if (patch_free_dofs.empty())
    throw DegenerateConstraintError("patch has no interior fine dofs");

  const int n_rows_full = static_cast<int>(op.matrix.rows());
  // Collect entries of the selected columns, grouped by original row.
  std::vector<std::vector<std::pair<int, double>>> row_entries(n_rows_full);
  for (int j = 0; j < static_cast<int>(patch_free_dofs.size()); ++j) {
    const int col = patch_free_dofs[j];
    for (SpMat::InnerIterator it(op.matrix, col); it; ++it)
      if (it.value() != 0.0) row_entries[it.row()].emplace_back(j, it.value());
  }

  ConstraintMatrix cm;
  cm.cols = patch_free_dofs;
  std::vector<int> row_of(n_rows_full, -1);
  for (int i = 0; i < n_rows_full; ++i)
    if (!row_entries[i].empty()) {
      row_of[i] = static_cast<int>(cm.rows.size());
      cm.rows.push_back(i);
    }

  std::vector<Triplet> trips;
  for (int i = 0; i < n_rows_full; ++i)
    for (const auto& [j, v] : row_entries[i]) trips.emplace_back(row_of[i], j, v);
  cm.C.resize(static_cast<int>(cm.rows.size()), static_cast<int>(patch_free_dofs.size()));
  cm.C.setFromTriplets(trips.begin(), trips.end());
  cm.C.makeCompressed();
  return cm;
}

} // namespace lodwave

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lodwave/mesh.hpp"

namespace lodwave {

/// Scalar coefficient field A(x) on the unit square with uniform bounds
/// 0 < alpha <= A(x) <= beta. `epsilon` is the finest variation scale of the
/// field; meshes sampling it must have cell side <= epsilon.
struct CoefficientField {
  enum class Kind { Example2, Grid, Constant };

  Kind kind = Kind::Constant;
  double alpha = 1.0;
  double beta = 1.0;
  double epsilon = 1.0;
  double constant = 1.0;           ///< Constant: the value
  int grid_cells = 0;              ///< Grid: cells per side of the eps-grid
  std::vector<double> grid_values; ///< Grid: row-major per-cell values

  /// Pointwise evaluation with half-open cells, so dyadic midpoints never
  /// hit a discontinuity.
  double eval(double x, double y) const;
};

/// The rough coefficient of the second experiment: floor-quantized ramp
/// factors times sin^2 factors, plus one. Piecewise constant with finest
/// scale 1/64, values in [1, 17.7774].
double example2_eval(double x1, double x2);

CoefficientField example2_field();
CoefficientField constant_field(double value);

/// Field with prescribed per-cell values on a uniform grid; cells_per_side
/// must be a power of two.
CoefficientField grid_field(std::vector<double> values, int cells_per_side,
                            double alpha, double beta);

/// Seeded random checkerboard: piecewise constant on an epsilon-grid with
/// i.i.d. values uniform in [alpha, beta]. epsilon must be a dyadic fraction
/// 2^-k. Deterministic per seed, independent of platform RNG details.
CoefficientField synthetic_checkerboard(std::uint64_t seed, double epsilon,
                                        double alpha, double beta);

/// One value per element of `mesh`, the field evaluated at element
/// midpoints. Throws ResolutionError if the mesh does not resolve epsilon.
std::vector<double> sample_to_mesh(const CoefficientField& field,
                                   const StructuredQuadMesh& mesh);

/// FNV-1a hash over the sampled values and the mesh level; keys the
/// corrector cache.
std::uint64_t coefficient_hash(const std::vector<double>& values, int mesh_level);

/// Row-major per-element values as CSV (one mesh row per line).
void write_coefficient_csv(const std::string& path, const std::vector<double>& values,
                           int cells_per_side);

} // namespace lodwave

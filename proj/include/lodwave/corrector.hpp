#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lodwave/coefficient.hpp"
#include "lodwave/fem.hpp"
#include "lodwave/interpolation.hpp"
#include "lodwave/linalg.hpp"
#include "lodwave/mesh.hpp"

namespace lodwave {

/// One localized element corrector q_{T,i}: the fine-scale response of the
/// coarse corner hat of element T, supported on the interior of the
/// ell-layer patch around T and lying in the kernel of I_H.
struct ElementCorrector {
  int elem = 0;
  int corner = 0; ///< 0..3, order SW, SE, NE, NW
  int layers = 0;
  std::vector<int> support; ///< fine free-dof indices (patch interior)
  Vec values;               ///< one value per support entry
};

/// All element correctors of a (coarse, fine, coefficient, bc, ell) tuple
/// plus the assembled correction operator Q. The column of Q for a coarse
/// vertex z is the sum of q_{T,i} over elements T having z as corner i,
/// so Q * v_H applies the localized correction operator to v_H.
struct CorrectorSet {
  int coarse_level = 0;
  int fine_level = 0;
  int ell = 0;
  BoundarySpec bc = BoundarySpec::FullBoundary;
  std::uint64_t coeff_hash = 0;
  std::vector<ElementCorrector> correctors; ///< empty when loaded from cache
  SpMat Q;                                  ///< fine free x coarse free
  bool from_cache = false;
};

/// Shared read-only operators used by every corrector solve of one
/// (coarse, fine, coefficient, bc) tuple.
struct LodAssemblies {
  StructuredQuadMesh coarse;
  StructuredQuadMesh fine;
  BoundarySpec bc = BoundarySpec::FullBoundary;
  DofMap coarse_dofs;
  DofMap fine_dofs;
  std::vector<double> coeff_values; ///< per fine element
  std::uint64_t coeff_hash = 0;
  SpMat K_free; ///< fine stiffness with the coefficient
  SpMat M_free; ///< fine mass
  SpMat P_free; ///< prolongation restricted to free dofs
  InterpolationOperator IH;
};

LodAssemblies build_lod_assemblies(const StructuredQuadMesh& coarse,
                                   const StructuredQuadMesh& fine,
                                   const std::vector<double>& coeff_values,
                                   BoundarySpec bc);

/// Solves the saddle-point problem
///   [ K_patch  C^T ] [q]   [a|_T(Lambda_{T,i}, .)]
///   [ C         0  ] [l] = [0                    ]
/// on the interior dofs of the ell-layer patch around T. Throws NumericError
/// with patch diagnostics if the factorization fails or the residual exceeds
/// 1e-9, and ArgumentError if the requested corner lies on Gamma.
ElementCorrector solve_element_corrector(const LodAssemblies& ops, int elem,
                                         int corner, int layers);

/// Solves all element correctors (corners on Gamma skipped) and assembles Q.
/// Solves are independent over (T, i) and run on `jobs` threads; results do
/// not depend on the scheduling.
CorrectorSet build_corrector_set(const LodAssemblies& ops, int ell, int jobs = 1);

/// System matrices of the multiscale space (1 - C_h^ell) V_H.
struct MultiscaleSystem {
  SpMat B;     ///< basis map P - Q, fine free x coarse free
  SpMat K_ms;  ///< B^T K_fine B
  SpMat M_ms;  ///< B^T M_fine B
  SpMat M_fem; ///< coarse consistent mass (simplified method)
};

MultiscaleSystem build_multiscale_system(const LodAssemblies& ops,
                                         const CorrectorSet& set);

/// sup over coarse basis hats of the relative energy-norm difference
/// between the global and the ell-localized corrector, for ell = 1..ell_max.
struct DecayEntry {
  int ell = 0;
  double residual = 0;
};
std::vector<DecayEntry> measure_localization_decay(const LodAssemblies& ops,
                                                   int ell_max, int jobs = 1);

/// Offline-stage cache: Q plus identifying metadata in a binary sidecar file
/// keyed by (levels, coefficient hash, ell, bc). Writes are atomic
/// (temp file + rename).
std::string corrector_cache_path(const std::string& dir, const LodAssemblies& ops, int ell);
void save_corrector_cache(const std::string& path, const CorrectorSet& set);
std::optional<CorrectorSet> load_corrector_cache(const std::string& path,
                                                 const LodAssemblies& ops, int ell);

/// Loads the set from `cache_dir` if present, otherwise builds and stores it.
/// An empty cache_dir disables caching.
CorrectorSet build_or_load_corrector_set(const LodAssemblies& ops, int ell,
                                         const std::string& cache_dir, int jobs = 1);

} // namespace lodwave

#include "lodwave/corrector.hpp"

#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <thread>
#include <unistd.h>

#include <Eigen/SparseLU>

#include "lodwave/errors.hpp"

namespace lodwave {

namespace {

std::array<double, 4> corner_shape(double xi, double eta) {
  return {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
}

// Saddle-point system of one patch: fine stiffness on the interior dofs,
// bordered by the kernel constraints. Factored once and shared by all
// corrector solves on the same patch.
struct PatchSystem {
  Patch patch;
  std::vector<int> dofs; ///< fine free-dof indices, ascending
  std::vector<int> pos;  ///< fine free dof -> local index or -1
  ConstraintMatrix constraints;
  SpMat kkt;
  Eigen::SparseLU<SpMat> lu;
  int np = 0;
  int nc = 0;

  std::string describe() const {
    return "patch [" + std::to_string(patch.i0) + ".." + std::to_string(patch.i1) +
           "]x[" + std::to_string(patch.j0) + ".." + std::to_string(patch.j1) +
           "] with " + std::to_string(np) + " dofs, " + std::to_string(nc) +
           " constraints";
  }
};

std::unique_ptr<PatchSystem> build_patch_system(const LodAssemblies& ops, Patch patch) {
  auto sys = std::make_unique<PatchSystem>();
  sys->patch = std::move(patch);

  const auto verts =
      patch_interior_fine_vertices(ops.coarse, ops.fine, sys->patch, ops.bc);
  sys->dofs.reserve(verts.size());
  for (int v : verts) {
    const int d = ops.fine_dofs.vert_to_free[v];
    if (d >= 0) sys->dofs.push_back(d);
  }
  sys->constraints = kernel_constraint_matrix(ops.IH, sys->dofs);
  sys->np = static_cast<int>(sys->dofs.size());
  sys->nc = static_cast<int>(sys->constraints.rows.size());

  sys->pos.assign(ops.fine_dofs.n_free(), -1);
  for (int k = 0; k < sys->np; ++k) sys->pos[sys->dofs[k]] = k;

  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(sys->np) * 9 +
                2 * sys->constraints.C.nonZeros());
  for (int j = 0; j < sys->np; ++j) {
    const int col = sys->dofs[j];
    for (SpMat::InnerIterator it(ops.K_free, col); it; ++it) {
      const int i = sys->pos[it.row()];
      if (i >= 0) trips.emplace_back(i, j, it.value());
    }
  }
  for (int k = 0; k < sys->constraints.C.outerSize(); ++k)
    for (SpMat::InnerIterator it(sys->constraints.C, k); it; ++it) {
      trips.emplace_back(sys->np + static_cast<int>(it.row()),
                         static_cast<int>(it.col()), it.value());
      trips.emplace_back(static_cast<int>(it.col()),
                         sys->np + static_cast<int>(it.row()), it.value());
    }

  sys->kkt.resize(sys->np + sys->nc, sys->np + sys->nc);
  sys->kkt.setFromTriplets(trips.begin(), trips.end());
  sys->kkt.makeCompressed();

  sys->lu.compute(sys->kkt);
  if (sys->lu.info() != Eigen::Success)
    throw NumericError("singular corrector saddle point on " + sys->describe());
  return sys;
}

// Right-hand side a|_T(Lambda_{T,i}, .) for all four corner hats at once,
// restricted to the patch-interior dofs.
Eigen::Matrix<double, Eigen::Dynamic, 4> corner_loads(const LodAssemblies& ops,
                                                      const PatchSystem& sys, int elem) {
  Eigen::Matrix<double, Eigen::Dynamic, 4> rhs =
      Eigen::Matrix<double, Eigen::Dynamic, 4>::Zero(sys.np + sys.nc, 4);
  const int r = ops.fine.cells / ops.coarse.cells;
  const int ci = ops.coarse.elem_i(elem);
  const int cj = ops.coarse.elem_j(elem);
  for (int b = 0; b < r; ++b)
    for (int a = 0; a < r; ++a) {
      const int fe = ops.fine.elem_id(ci * r + a, cj * r + b);
      const double coeff = ops.coeff_values[fe];
      const auto corners = ops.fine.elem_corners(fe);
      // Coarse hats of T evaluated at the fine corner vertices.
      const std::array<std::array<double, 4>, 4> lam = {
          corner_shape(static_cast<double>(a) / r, static_cast<double>(b) / r),
          corner_shape(static_cast<double>(a + 1) / r, static_cast<double>(b) / r),
          corner_shape(static_cast<double>(a + 1) / r, static_cast<double>(b + 1) / r),
          corner_shape(static_cast<double>(a) / r, static_cast<double>(b + 1) / r)};
      for (int c1 = 0; c1 < 4; ++c1) {
        const int free = ops.fine_dofs.vert_to_free[corners[c1]];
        if (free < 0) continue;
        const int row = sys.pos[free];
        if (row < 0) continue;
        for (int c2 = 0; c2 < 4; ++c2) {
          const double k = coeff * kQ1Stiffness[c1][c2];
          for (int i = 0; i < 4; ++i) rhs(row, i) += k * lam[c2][i];
        }
      }
    }
  return rhs;
}

ElementCorrector solve_corner(const LodAssemblies& ops, const PatchSystem& sys,
                              const Eigen::Ref<const Vec>& rhs, int elem, int corner,
                              int layers) {
  const Vec x = sys.lu.solve(rhs);
  const double rhs_norm = rhs.norm();
  const double rel = (sys.kkt * x - rhs).norm() / (rhs_norm > 0 ? rhs_norm : 1.0);
  if (!(rel <= 1e-9))
    throw NumericError("corrector solve for element " + std::to_string(elem) +
                       ", corner " + std::to_string(corner) + " on " + sys.describe() +
                       " missed the residual contract: " + std::to_string(rel));
  ElementCorrector ec;
  ec.elem = elem;
  ec.corner = corner;
  ec.layers = layers;
  ec.support = sys.dofs;
  ec.values = x.head(sys.np);
  return ec;
}

int corner_free_dof(const LodAssemblies& ops, int elem, int corner) {
  return ops.coarse_dofs.vert_to_free[ops.coarse.elem_corners(elem)[corner]];
}

} // namespace

LodAssemblies build_lod_assemblies(const StructuredQuadMesh& coarse,
                                   const StructuredQuadMesh& fine,
                                   const std::vector<double>& coeff_values,
                                   BoundarySpec bc) {
  if (fine.level < coarse.level)
    throw ArgumentError("fine mesh must refine the coarse mesh");
  LodAssemblies ops;
  ops.coarse = coarse;
  ops.fine = fine;
  ops.bc = bc;
  ops.coarse_dofs = make_dof_map(coarse, bc);
  ops.fine_dofs = make_dof_map(fine, bc);
  ops.coeff_values = coeff_values;
  ops.coeff_hash = coefficient_hash(coeff_values, fine.level);
  ops.K_free = restrict_to_free(assemble_stiffness_full(fine, coeff_values), ops.fine_dofs);
  ops.M_free = restrict_to_free(assemble_mass_full(fine), ops.fine_dofs);
  ops.P_free = restrict_to_free(prolongation_matrix(coarse, fine), ops.fine_dofs,
                                ops.coarse_dofs);
  ops.IH = build_IH(coarse, fine, bc);
  return ops;
}

ElementCorrector solve_element_corrector(const LodAssemblies& ops, int elem,
                                         int corner, int layers) {
  if (corner < 0 || corner > 3) throw ArgumentError("corner index must be 0..3");
  if (corner_free_dof(ops, elem, corner) < 0)
    throw ArgumentError("corner lies on Gamma; its hat is not a free dof");
  const auto sys = build_patch_system(ops, element_patch(ops.coarse, elem, layers));
  const auto rhs = corner_loads(ops, *sys, elem);
  return solve_corner(ops, *sys, rhs.col(corner), elem, corner, layers);
}

CorrectorSet build_corrector_set(const LodAssemblies& ops, int ell, int jobs) {
  const int n_elems = ops.coarse.n_elems();
  std::vector<std::array<std::unique_ptr<ElementCorrector>, 4>> results(n_elems);

  // Patches that span the whole domain share one factorization.
  std::unique_ptr<PatchSystem> shared;
  bool any_covering = false;
  for (int T = 0; T < n_elems && !any_covering; ++T)
    any_covering = element_patch(ops.coarse, T, ell).covers(ops.coarse);
  if (any_covering) {
    int T_cover = 0;
    for (int T = 0; T < n_elems; ++T)
      if (element_patch(ops.coarse, T, ell).covers(ops.coarse)) {
        T_cover = T;
        break;
      }
    shared = build_patch_system(ops, element_patch(ops.coarse, T_cover, ell));
  }

  const auto solve_element = [&](int T) {
    Patch patch = element_patch(ops.coarse, T, ell);
    const PatchSystem* sys = nullptr;
    std::unique_ptr<PatchSystem> own;
    if (shared && patch.covers(ops.coarse)) {
      sys = shared.get();
    } else {
      own = build_patch_system(ops, std::move(patch));
      sys = own.get();
    }
    const auto rhs = corner_loads(ops, *sys, T);
    for (int i = 0; i < 4; ++i) {
      if (corner_free_dof(ops, T, i) < 0) continue;
      results[T][i] = std::make_unique<ElementCorrector>(
          solve_corner(ops, *sys, rhs.col(i), T, i, ell));
    }
  };

  if (jobs <= 1) {
    for (int T = 0; T < n_elems; ++T) solve_element(T);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
      for (;;) {
        const int T = next.fetch_add(1);
        if (T >= n_elems) return;
        try {
          solve_element(T);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  CorrectorSet set;
  set.coarse_level = ops.coarse.level;
  set.fine_level = ops.fine.level;
  set.ell = ell;
  set.bc = ops.bc;
  set.coeff_hash = ops.coeff_hash;

  std::vector<Triplet> trips;
  for (int T = 0; T < n_elems; ++T)
    for (int i = 0; i < 4; ++i) {
      if (!results[T][i]) continue;
      ElementCorrector& ec = *results[T][i];
      const int col = corner_free_dof(ops, T, i);
      for (int k = 0; k < static_cast<int>(ec.support.size()); ++k)
        if (ec.values[k] != 0.0) trips.emplace_back(ec.support[k], col, ec.values[k]);
      set.correctors.push_back(std::move(ec));
    }
  set.Q.resize(ops.fine_dofs.n_free(), ops.coarse_dofs.n_free());
  set.Q.setFromTriplets(trips.begin(), trips.end());
  set.Q.makeCompressed();
  return set;
}

MultiscaleSystem build_multiscale_system(const LodAssemblies& ops,
                                         const CorrectorSet& set) {
  MultiscaleSystem ms;
  ms.B = (ops.P_free - set.Q).pruned();
  ms.B.makeCompressed();
  const SpMat bt = ms.B.transpose();
  SpMat kms = bt * (ops.K_free * ms.B).eval();
  SpMat mms = bt * (ops.M_free * ms.B).eval();
  // The Galerkin products are symmetric up to rounding; symmetrize exactly.
  ms.K_ms = 0.5 * (kms + SpMat(kms.transpose()));
  ms.M_ms = 0.5 * (mms + SpMat(mms.transpose()));
  ms.M_fem = assemble_mass(ops.coarse, ops.bc);
  return ms;
}

std::vector<DecayEntry> measure_localization_decay(const LodAssemblies& ops,
                                                   int ell_max, int jobs) {
  const CorrectorSet global = build_corrector_set(ops, ops.coarse.cells, jobs);
  const SpMat K1 = restrict_to_free(
      assemble_stiffness_full(ops.fine, std::vector<double>(ops.fine.n_elems(), 1.0)),
      ops.fine_dofs);

  const int n_coarse = ops.coarse_dofs.n_free();
  std::vector<double> denom(n_coarse);
  for (int z = 0; z < n_coarse; ++z) {
    const Vec lam = ops.P_free.col(z);
    denom[z] = std::sqrt(lam.dot(K1 * lam));
  }

  std::vector<DecayEntry> table;
  for (int ell = 1; ell <= ell_max; ++ell) {
    const CorrectorSet local = build_corrector_set(ops, ell, jobs);
    double worst = 0;
    for (int z = 0; z < n_coarse; ++z) {
      const Vec d = Vec(global.Q.col(z)) - Vec(local.Q.col(z));
      worst = std::max(worst, std::sqrt(d.dot(K1 * d)) / denom[z]);
    }
    table.push_back({ell, worst});
  }
  return table;
}

namespace {

constexpr char kCacheMagic[8] = {'L', 'O', 'D', 'W', 'Q', '1', '\n', '\0'};

struct CacheHeader {
  char magic[8];
  std::int32_t coarse_level = 0;
  std::int32_t fine_level = 0;
  std::int32_t ell = 0;
  std::int32_t bc = 0;
  std::int32_t rows = 0;
  std::int32_t cols = 0;
  std::uint64_t coeff_hash = 0;
  std::int64_t nnz = 0;
};

} // namespace

std::string corrector_cache_path(const std::string& dir, const LodAssemblies& ops,
                                 int ell) {
  char hash_hex[32];
  std::snprintf(hash_hex, sizeof hash_hex, "%016" PRIx64, ops.coeff_hash);
  return dir + "/corr-c" + std::to_string(ops.coarse.level) + "-f" +
         std::to_string(ops.fine.level) + "-l" + std::to_string(ell) +
         (ops.bc == BoundarySpec::FullBoundary ? "-full-" : "-left-") + hash_hex +
         ".bin";
}

void save_corrector_cache(const std::string& path, const CorrectorSet& set) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());

  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ArgumentError("cannot open " + tmp.string() + " for writing");
    CacheHeader h;
    std::copy(std::begin(kCacheMagic), std::end(kCacheMagic), h.magic);
    h.coarse_level = set.coarse_level;
    h.fine_level = set.fine_level;
    h.ell = set.ell;
    h.bc = set.bc == BoundarySpec::FullBoundary ? 0 : 1;
    h.rows = static_cast<std::int32_t>(set.Q.rows());
    h.cols = static_cast<std::int32_t>(set.Q.cols());
    h.coeff_hash = set.coeff_hash;
    h.nnz = static_cast<std::int64_t>(set.Q.nonZeros());
    out.write(reinterpret_cast<const char*>(&h), sizeof h);
    for (int k = 0; k < set.Q.outerSize(); ++k)
      for (SpMat::InnerIterator it(set.Q, k); it; ++it) {
        const std::int32_t r = static_cast<std::int32_t>(it.row());
        const std::int32_t c = static_cast<std::int32_t>(it.col());
        const double v = it.value();
        out.write(reinterpret_cast<const char*>(&r), sizeof r);
        out.write(reinterpret_cast<const char*>(&c), sizeof c);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
    if (!out) throw ArgumentError("failed writing corrector cache " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::optional<CorrectorSet> load_corrector_cache(const std::string& path,
                                                 const LodAssemblies& ops, int ell) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  CacheHeader h;
  in.read(reinterpret_cast<char*>(&h), sizeof h);
  if (!in || !std::equal(std::begin(kCacheMagic), std::end(kCacheMagic), h.magic))
    return std::nullopt;
  if (h.coarse_level != ops.coarse.level || h.fine_level != ops.fine.level ||
      h.ell != ell || h.bc != (ops.bc == BoundarySpec::FullBoundary ? 0 : 1) ||
      h.coeff_hash != ops.coeff_hash || h.rows != ops.fine_dofs.n_free() ||
      h.cols != ops.coarse_dofs.n_free())
    return std::nullopt;

  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(h.nnz));
  for (std::int64_t k = 0; k < h.nnz; ++k) {
    std::int32_t r = 0, c = 0;
    double v = 0;
    in.read(reinterpret_cast<char*>(&r), sizeof r);
    in.read(reinterpret_cast<char*>(&c), sizeof c);
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) return std::nullopt;
    trips.emplace_back(r, c, v);
  }

  CorrectorSet set;
  set.coarse_level = h.coarse_level;
  set.fine_level = h.fine_level;
  set.ell = h.ell;
  set.bc = ops.bc;
  set.coeff_hash = h.coeff_hash;
  set.from_cache = true;
  set.Q.resize(h.rows, h.cols);
  set.Q.setFromTriplets(trips.begin(), trips.end());
  set.Q.makeCompressed();
  return set;
}

CorrectorSet build_or_load_corrector_set(const LodAssemblies& ops, int ell,
                                         const std::string& cache_dir, int jobs) {
  if (cache_dir.empty()) return build_corrector_set(ops, ell, jobs);
  const std::string path = corrector_cache_path(cache_dir, ops, ell);
  if (auto cached = load_corrector_cache(path, ops, ell)) return std::move(*cached);
  CorrectorSet set = build_corrector_set(ops, ell, jobs);
  save_corrector_cache(path, set);
  return set;
}

} // namespace lodwave

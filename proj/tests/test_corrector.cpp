#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>

#include "lodwave/coefficient.hpp"
#include "lodwave/corrector.hpp"
#include "lodwave/errors.hpp"
#include "test_utils.hpp"

using namespace lodwave;
using test_utils::random_kernel_vector;
using test_utils::random_vector;
using test_utils::scatter_corrector;

namespace {

LodAssemblies rough_assemblies(int coarse_level, int fine_level, BoundarySpec bc,
                               std::uint64_t seed = 5) {
  const auto coarse = build_mesh(coarse_level);
  const auto fine = build_mesh(fine_level);
  const auto field =
      synthetic_checkerboard(seed, 1.0 / (1 << std::min(fine_level, 4)), 0.1, 3.0);
  return build_lod_assemblies(coarse, fine, sample_to_mesh(field, fine), bc);
}

} // namespace

TEST_CASE("global correctors satisfy the defining variational equation") {
  const auto ops = rough_assemblies(2, 4, BoundarySpec::FullBoundary);
  const int cover = ops.coarse.cells;
  const auto set = build_corrector_set(ops, cover);

  for (const ElementCorrector& ec : set.correctors) {
    const Vec q = scatter_corrector(ec, ops.fine_dofs.n_free());

    // Kernel membership.
    CHECK((ops.IH.matrix * q).norm() <= 1e-9 * q.norm());

    const SpMat KT = restrict_to_free(
        assemble_element_restricted_stiffness(ops.coarse, ops.fine, ops.coeff_values,
                                              ec.elem),
        ops.fine_dofs);
    const int zfree =
        ops.coarse_dofs.vert_to_free[ops.coarse.elem_corners(ec.elem)[ec.corner]];
    const Vec lambda = ops.P_free.col(zfree);
    const Vec KT_lambda = KT * lambda;

    for (int trial = 0; trial < 20; ++trial) {
      const Vec w = random_kernel_vector(ops, 40 + trial);
      const double lhs = q.dot(ops.K_free * w);
      const double rhs = KT_lambda.dot(w);
      const double scale = std::max(
          1e-12, std::sqrt(q.dot(ops.K_free * q)) * std::sqrt(w.dot(ops.K_free * w)));
      CHECK(std::abs(lhs - rhs) <= 1e-9 * scale);
    }
  }
}

TEST_CASE("corrector energy is bounded by the hat energy for constant A") {
  const auto coarse = build_mesh(2);
  const auto fine = build_mesh(4);
  const auto ops = build_lod_assemblies(
      coarse, fine, std::vector<double>(fine.n_elems(), 1.0), BoundarySpec::FullBoundary);
  const auto set = build_corrector_set(ops, coarse.cells);
  for (const ElementCorrector& ec : set.correctors) {
    const Vec q = scatter_corrector(ec, ops.fine_dofs.n_free());
    const int zfree =
        ops.coarse_dofs.vert_to_free[ops.coarse.elem_corners(ec.elem)[ec.corner]];
    const Vec lambda = ops.P_free.col(zfree);
    CHECK(q.dot(ops.K_free * q) <=
          lambda.dot(ops.K_free * lambda) * (1 + 1e-9));
  }
}

TEST_CASE("global correction is a-orthogonal to the fine-scale space") {
  const auto ops = rough_assemblies(2, 4, BoundarySpec::LeftEdge);
  const auto set = build_corrector_set(ops, ops.coarse.cells);
  const auto ms = build_multiscale_system(ops, set);

  for (int trial = 0; trial < 20; ++trial) {
    const Vec v = random_vector(ops.coarse_dofs.n_free(), 70 + trial);
    const Vec w = random_kernel_vector(ops, 170 + trial);
    const Vec bv = ms.B * v;
    const double lhs = std::abs(bv.dot(ops.K_free * w));
    const double scale = std::sqrt(bv.dot(ops.K_free * bv)) *
                         std::sqrt(w.dot(ops.K_free * w));
    CHECK(lhs <= 1e-8 * scale);
  }

  // Energy of the correction never exceeds the energy of the input.
  for (int trial = 0; trial < 10; ++trial) {
    const Vec v = random_vector(ops.coarse_dofs.n_free(), 270 + trial);
    const Vec qv = set.Q * v;
    const Vec pv = ops.P_free * v;
    CHECK(qv.dot(ops.K_free * qv) <= pv.dot(ops.K_free * pv) * (1 + 1e-9));
  }
}

TEST_CASE("corner hats of a fully free element have cancelling correctors") {
  const auto ops = rough_assemblies(2, 5, BoundarySpec::LeftEdge);
  const auto set = build_corrector_set(ops, ops.coarse.cells);

  // The four hats on T sum to the constant 1, whose restricted load
  // a|_T(1, .) vanishes, so the four correctors sum to zero by linearity.
  const int T = ops.coarse.elem_id(2, 1);
  for (int z : ops.coarse.elem_corners(T)) REQUIRE(ops.coarse_dofs.vert_to_free[z] >= 0);

  Vec sum = Vec::Zero(ops.fine_dofs.n_free());
  double scale = 0;
  for (const ElementCorrector& ec : set.correctors) {
    if (ec.elem != T) continue;
    const Vec q = scatter_corrector(ec, ops.fine_dofs.n_free());
    sum += q;
    scale = std::max(scale, q.norm());
  }
  REQUIRE(scale > 0);
  CHECK(sum.norm() <= 1e-8 * scale);
}

TEST_CASE("solve_element_corrector agrees with the assembled set") {
  const auto ops = rough_assemblies(2, 4, BoundarySpec::FullBoundary);
  const auto set = build_corrector_set(ops, ops.coarse.cells);

  const int T = ops.coarse.elem_id(1, 1);
  const int corner = 2;
  const auto single = solve_element_corrector(ops, T, corner, ops.coarse.cells);
  for (const ElementCorrector& ec : set.correctors)
    if (ec.elem == T && ec.corner == corner) {
      CHECK((scatter_corrector(ec, ops.fine_dofs.n_free()) -
             scatter_corrector(single, ops.fine_dofs.n_free()))
                .norm() <= 1e-12);
    }

  // A corner on Gamma has no free hat.
  CHECK_THROWS_AS(solve_element_corrector(ops, ops.coarse.elem_id(0, 0), 0, 1),
                  ArgumentError);
}

TEST_CASE("localized correctors vanish outside their patch") {
  const auto ops = rough_assemblies(3, 5, BoundarySpec::FullBoundary);
  const auto ec = solve_element_corrector(ops, ops.coarse.elem_id(4, 4), 1, 1);
  const auto patch = element_patch(ops.coarse, ops.coarse.elem_id(4, 4), 1);
  std::vector<char> inside(ops.fine_dofs.n_free(), 0);
  for (int v : patch_interior_fine_vertices(ops.coarse, ops.fine, patch, ops.bc))
    inside[ops.fine_dofs.vert_to_free[v]] = 1;
  const Vec q = scatter_corrector(ec, ops.fine_dofs.n_free());
  for (int k = 0; k < q.size(); ++k)
    if (!inside[k]) CHECK(q[k] == 0.0);
}

TEST_CASE("localization residual decays with the patch size") {
  const auto ops = rough_assemblies(2, 5, BoundarySpec::FullBoundary);
  const auto table = measure_localization_decay(ops, ops.coarse.cells);
  REQUIRE(table.size() == 4);
  for (std::size_t k = 1; k < table.size(); ++k)
    CHECK(table[k].residual <= table[k - 1].residual + 1e-12);
  // The last patch spans the domain, so the residual is solver noise.
  CHECK(table.back().residual <= 1e-9);

  // ell = 0 is admissible here (refinement factor 8) and is worse than ell = 1.
  const auto global = build_corrector_set(ops, ops.coarse.cells);
  const auto l0 = build_corrector_set(ops, 0);
  const auto l1 = build_corrector_set(ops, 1);
  const Vec v = random_vector(ops.coarse_dofs.n_free(), 99);
  const SpMat K1 = restrict_to_free(
      assemble_stiffness_full(ops.fine, std::vector<double>(ops.fine.n_elems(), 1.0)),
      ops.fine_dofs);
  const Vec d0 = (global.Q - l0.Q) * v;
  const Vec d1 = (global.Q - l1.Q) * v;
  CHECK(std::sqrt(d1.dot(K1 * d1)) < std::sqrt(d0.dot(K1 * d0)));
}

TEST_CASE("rank-deficient patch constraints raise a numeric error") {
  // Refinement factor 2: a zero-layer patch has a single interior dof but
  // four constraint rows.
  const auto ops = rough_assemblies(2, 3, BoundarySpec::FullBoundary);
  CHECK_THROWS_AS(solve_element_corrector(ops, ops.coarse.elem_id(1, 1), 0, 0),
                  NumericError);
}

TEST_CASE("multiscale system matrices") {
  const auto ops = rough_assemblies(2, 4, BoundarySpec::LeftEdge);
  const auto set = build_corrector_set(ops, 1);
  const auto ms = build_multiscale_system(ops, set);

  const double kmax = Eigen::MatrixXd(ms.K_ms).cwiseAbs().maxCoeff();
  CHECK(SpMat(ms.K_ms - SpMat(ms.K_ms.transpose())).norm() <= 1e-12 * kmax);

  for (int trial = 0; trial < 5; ++trial) {
    const Vec v = random_vector(ops.coarse_dofs.n_free(), 30 + trial);
    const Vec direct = ms.B.transpose() * (ops.K_free * (ms.B * v));
    CHECK((ms.K_ms * v - direct).norm() <= 1e-12 * direct.norm());
  }

  CHECK_NOTHROW(SpdSolver(ms.M_ms, "M_ms"));
  CHECK_NOTHROW(SpdSolver(ms.M_fem, "M_fem"));

  const Eigen::MatrixXd kms_dense(ms.K_ms);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kms_dense);
  CHECK(es.eigenvalues().minCoeff() > 0);

  // M_fem equals the Galerkin mass of the uncorrected coarse space.
  const SpMat galerkin = ops.P_free.transpose() * (ops.M_free * ops.P_free).eval();
  CHECK(SpMat(ms.M_fem - galerkin).norm() <= 1e-12 * Eigen::MatrixXd(galerkin).cwiseAbs().maxCoeff());
}

TEST_CASE("corrector cache round-trips bit-exactly") {
  const auto ops = rough_assemblies(2, 4, BoundarySpec::FullBoundary, 11);
  const auto set = build_corrector_set(ops, 1);

  const std::string dir =
      (std::filesystem::temp_directory_path() / "lodwave_cache_test").string();
  std::filesystem::remove_all(dir);

  const std::string path = corrector_cache_path(dir, ops, 1);
  save_corrector_cache(path, set);
  const auto loaded = load_corrector_cache(path, ops, 1);
  REQUIRE(loaded.has_value());
  CHECK(loaded->from_cache);
  CHECK(SpMat(loaded->Q - set.Q).norm() == 0.0);

  // Wrong key misses.
  CHECK(!load_corrector_cache(path, ops, 2).has_value());

  // build_or_load: first call stores, second loads.
  std::filesystem::remove_all(dir);
  const auto first = build_or_load_corrector_set(ops, 1, dir);
  CHECK(!first.from_cache);
  const auto second = build_or_load_corrector_set(ops, 1, dir);
  CHECK(second.from_cache);
  CHECK(SpMat(first.Q - second.Q).norm() == 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("parallel corrector build matches the sequential one") {
  const auto ops = rough_assemblies(2, 4, BoundarySpec::LeftEdge, 13);
  const auto seq = build_corrector_set(ops, 1, 1);
  const auto par = build_corrector_set(ops, 1, 3);
  CHECK(SpMat(seq.Q - par.Q).norm() == 0.0);
}

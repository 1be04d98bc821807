#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lodwave/coefficient.hpp"
#include "lodwave/errors.hpp"
#include "lodwave/fem.hpp"
#include "test_utils.hpp"

using namespace lodwave;

TEST_CASE("single-element stiffness matches the analytic integral") {
  const auto mesh = build_mesh(0);
  const SpMat K = assemble_stiffness_full(mesh, {1.0});
  // Corner order SW, SE, NE, NW.
  const double expected[4][4] = {{4, -1, -2, -1}, {-1, 4, -1, -2}, {-2, -1, 4, -1},
                                 {-1, -2, -1, 4}};
  const auto corners = mesh.elem_corners(0);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(K.coeff(corners[i], corners[j]) ==
            doctest::Approx(expected[i][j] / 6.0).epsilon(1e-15));
}

TEST_CASE("single-element mass matches the analytic integral") {
  const auto mesh = build_mesh(1); // side 1/2
  const SpMat M = assemble_mass_full(mesh);
  const double s2 = 0.25;
  const auto corners = mesh.elem_corners(0);
  const double expected[4][4] = {{4, 2, 1, 2}, {2, 4, 2, 1}, {1, 2, 4, 2}, {2, 1, 2, 4}};
  // Entry (c0, c1) of element 0 only gets one element contribution for the
  // SW corner pair.
  CHECK(M.coeff(corners[0], corners[1]) ==
        doctest::Approx(s2 * expected[0][1] / 36.0).epsilon(1e-15));
  CHECK(M.coeff(corners[0], corners[2]) ==
        doctest::Approx(s2 * expected[0][2] / 36.0).epsilon(1e-15));

  // Total integral of 1*1 over the domain.
  double sum = 0;
  for (int k = 0; k < M.outerSize(); ++k)
    for (SpMat::InnerIterator it(M, k); it; ++it) sum += it.value();
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("stiffness kernel is the constants") {
  const auto mesh = build_mesh(3);
  const auto coeff = sample_to_mesh(synthetic_checkerboard(3, 1.0 / 8, 0.1, 3.0), mesh);
  const SpMat K = assemble_stiffness_full(mesh, coeff);
  CHECK((K * Vec::Ones(mesh.n_verts())).norm() < 1e-13 * K.norm());

  // Dimension check on a small mesh: exactly one (near-)zero eigenvalue.
  const auto m2 = build_mesh(2);
  const SpMat K2 = assemble_stiffness_full(m2, std::vector<double>(m2.n_elems(), 1.0));
  const Eigen::MatrixXd k2_dense(K2);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k2_dense);
  int zeros = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (std::abs(es.eigenvalues()[i]) < 1e-12) ++zeros;
  CHECK(zeros == 1);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("stiffness is linear in the coefficient") {
  const auto mesh = build_mesh(2);
  std::vector<double> coeff(mesh.n_elems());
  for (int e = 0; e < mesh.n_elems(); ++e) coeff[e] = 0.5 + 0.25 * e;
  std::vector<double> doubled = coeff;
  for (double& v : doubled) v *= 2;
  const SpMat K1 = assemble_stiffness_full(mesh, coeff);
  const SpMat K2 = assemble_stiffness_full(mesh, doubled);
  CHECK(SpMat(K2 - SpMat(2.0 * K1)).norm() == 0.0);
}

TEST_CASE("assembled matrices are exactly symmetric") {
  const auto mesh = build_mesh(4);
  const auto coeff = sample_to_mesh(synthetic_checkerboard(9, 1.0 / 16, 0.04, 1.96), mesh);
  const SpMat K = assemble_stiffness_full(mesh, coeff);
  const SpMat M = assemble_mass_full(mesh);
  CHECK(SpMat(K - SpMat(K.transpose())).norm() == 0.0);
  CHECK(SpMat(M - SpMat(M.transpose())).norm() == 0.0);
}

TEST_CASE("element-restricted stiffness is additive") {
  const auto coarse = build_mesh(1);
  const auto fine = build_mesh(3);
  const auto coeff = sample_to_mesh(synthetic_checkerboard(5, 1.0 / 8, 0.2, 2.0), fine);

  SpMat sum(fine.n_verts(), fine.n_verts());
  for (int T = 0; T < coarse.n_elems(); ++T)
    sum = SpMat(sum + assemble_element_restricted_stiffness(coarse, fine, coeff, T));
  const SpMat full = assemble_stiffness_full(fine, coeff);
  CHECK(SpMat(sum - full).norm() < 1e-14 * full.norm());

  // Rows of vertices not touching T vanish.
  const SpMat KT = assemble_element_restricted_stiffness(coarse, fine, coeff, 0);
  const Vec far_row = KT.row(fine.vertex_id(8, 8)).transpose();
  CHECK(far_row.norm() == 0.0);

  // Restriction to the whole domain (level-0 coarse mesh) is the full matrix.
  const auto whole = build_mesh(0);
  const SpMat K_whole = assemble_element_restricted_stiffness(whole, fine, coeff, 0);
  CHECK(SpMat(K_whole - full).norm() == 0.0);
}

TEST_CASE("load vectors") {
  const auto mesh = build_mesh(3);
  const double s = mesh.side();

  const Vec zero = assemble_load_full(mesh, [](double, double) { return 0.0; });
  CHECK(zero.norm() == 0.0);

  const Vec ones = assemble_load_full(mesh, [](double, double) { return 1.0; });
  CHECK(ones[mesh.vertex_id(4, 4)] == doctest::Approx(s * s).epsilon(1e-14));
  CHECK(ones.sum() == doctest::Approx(1.0).epsilon(1e-14));

  // f(x,t) = sin(4 pi x1)(1-t) vanishes identically at t = 1.
  const double t = 1.0;
  const Vec at_t1 = assemble_load_full(
      mesh, [t](double x, double) { return std::sin(4 * M_PI * x) * (1 - t); });
  CHECK(at_t1.norm() == 0.0);
}

TEST_CASE("free-dof restriction") {
  const auto mesh = build_mesh(2);
  const auto dofs = make_dof_map(mesh, BoundarySpec::FullBoundary);
  REQUIRE(dofs.n_free() == 9);
  const SpMat K =
      assemble_stiffness(mesh, std::vector<double>(mesh.n_elems(), 1.0),
                         BoundarySpec::FullBoundary);
  CHECK(K.rows() == 9);
  // Dirichlet restriction with nonempty Gamma makes the stiffness definite.
  CHECK_NOTHROW(SpdSolver(K, "restricted stiffness"));
}

TEST_CASE("spd solver contract") {
  SpMat I(5, 5);
  I.setIdentity();
  const Vec b = test_utils::random_vector(5, 11);
  CHECK((SpdSolver(I).solve(b) - b).norm() == 0.0);

  const auto mesh = build_mesh(3);
  const SpMat M = assemble_mass(mesh, BoundarySpec::FullBoundary);
  const Vec y = test_utils::random_vector(M.rows(), 12);
  const Vec x = SpdSolver(M, "mass").solve(M * y);
  CHECK((x - y).norm() <= 1e-10 * y.norm());

  // Random SPD 50x50: A^T A + I.
  Eigen::MatrixXd R(50, 50);
  for (int i = 0; i < 50; ++i) R.col(i) = test_utils::random_vector(50, 100 + i);
  const Eigen::MatrixXd spd =
      R.transpose() * R + Eigen::MatrixXd::Identity(50, 50);
  const SpMat A = spd.sparseView();
  const Vec rhs = test_utils::random_vector(50, 13);
  const Vec sol = solve_spd(A, rhs);
  CHECK((A * sol - rhs).norm() <= 1e-10 * rhs.norm());

  SpMat neg(4, 4);
  neg.setIdentity();
  neg *= -1.0;
  CHECK_THROWS_AS(SpdSolver(neg, "negative identity"), NumericError);
}

TEST_CASE("lumped mass preserves the total integral") {
  const auto mesh = build_mesh(3);
  const SpMat M = assemble_mass_full(mesh);
  const SpMat L = lump_mass(M);
  CHECK(L.nonZeros() == mesh.n_verts());
  CHECK((L * Vec::Ones(mesh.n_verts())).sum() == doctest::Approx(1.0).epsilon(1e-14));
}

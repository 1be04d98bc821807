#include <doctest.h>

#include <algorithm>
#include <set>

#include "lodwave/errors.hpp"
#include "lodwave/mesh.hpp"

using namespace lodwave;

namespace {

// Brute-force oracle: the l-fold vertex-adjacency closure of {center}.
std::set<int> adjacency_closure(const StructuredQuadMesh& mesh, int center, int layers) {
  std::set<int> current{center};
  for (int round = 0; round < layers; ++round) {
    std::set<int> next = current;
    for (int e = 0; e < mesh.n_elems(); ++e) {
      const auto ce = mesh.elem_corners(e);
      for (int in : current) {
        const auto ci = mesh.elem_corners(in);
        const bool shares =
            std::any_of(ce.begin(), ce.end(), [&](int v) {
              return std::find(ci.begin(), ci.end(), v) != ci.end();
            });
        if (shares) next.insert(e);
      }
    }
    current = std::move(next);
  }
  return current;
}

} // namespace

TEST_CASE("mesh counts and sizes per level") {
  const auto m0 = build_mesh(0);
  CHECK(m0.n_elems() == 1);
  CHECK(m0.n_verts() == 4);

  const auto m3 = build_mesh(3);
  CHECK(m3.n_elems() == 64);
  CHECK(m3.n_verts() == 81);
  CHECK(m3.mesh_size() == doctest::Approx(std::sqrt(2.0) / 8).epsilon(1e-15));
  CHECK(m3.mesh_size() == doctest::Approx(0.17678).epsilon(1e-4));

  const auto m8 = build_mesh(8);
  CHECK(m8.n_elems() == 65536);
  CHECK(m8.n_verts() == 66049);

  CHECK_THROWS_AS(build_mesh(13), CapacityError);
  CHECK_THROWS_AS(build_mesh(-1), ArgumentError);
}

TEST_CASE("element geometry and numbering") {
  const auto m = build_mesh(2);
  const double s = 0.25;
  for (int e = 0; e < m.n_elems(); ++e) {
    const auto mid = m.elem_midpoint(e);
    CHECK(mid[0] == doctest::Approx((m.elem_i(e) + 0.5) * s));
    CHECK(mid[1] == doctest::Approx((m.elem_j(e) + 0.5) * s));
  }
  // Corner order SW, SE, NE, NW.
  const auto c = m.elem_corners(m.elem_id(1, 2));
  CHECK(m.vertex_coords(c[0]) == std::array<double, 2>{0.25, 0.5});
  CHECK(m.vertex_coords(c[1]) == std::array<double, 2>{0.5, 0.5});
  CHECK(m.vertex_coords(c[2]) == std::array<double, 2>{0.5, 0.75});
  CHECK(m.vertex_coords(c[3]) == std::array<double, 2>{0.25, 0.75});
}

TEST_CASE("free vertices per boundary spec") {
  const auto m1 = build_mesh(1);
  const auto f_full = free_vertices(m1, BoundarySpec::FullBoundary);
  REQUIRE(f_full.size() == 1);
  CHECK(f_full[0] == m1.vertex_id(1, 1));

  CHECK(free_vertices(m1, BoundarySpec::LeftEdge).size() == 6);
  CHECK(free_vertices(build_mesh(2), BoundarySpec::FullBoundary).size() == 9);
}

TEST_CASE("element patches match the adjacency-closure oracle") {
  const auto m = build_mesh(3);

  const int interior = m.elem_id(3, 4);
  CHECK(element_patch(m, interior, 0).elems == std::vector<int>{interior});

  for (int elem : {interior, m.elem_id(0, 0), m.elem_id(7, 3)})
    for (int layers : {1, 2}) {
      const auto patch = element_patch(m, elem, layers);
      const auto oracle = adjacency_closure(m, elem, layers);
      CHECK(std::set<int>(patch.elems.begin(), patch.elems.end()) == oracle);
    }

  CHECK(element_patch(m, interior, 1).elems.size() == 9);
  CHECK(element_patch(m, m.elem_id(0, 0), 1).elems.size() == 4);
}

TEST_CASE("patch monotonicity and full cover") {
  const auto m = build_mesh(3);
  const int elem = m.elem_id(6, 1);
  for (int layers = 0; layers < 4; ++layers) {
    const auto small = element_patch(m, elem, layers);
    const auto big = element_patch(m, elem, layers + 1);
    CHECK(std::includes(big.elems.begin(), big.elems.end(), small.elems.begin(),
                        small.elems.end()));
  }
  CHECK(element_patch(m, elem, m.cells).covers(m));
}

TEST_CASE("refinement consistency: fine elements partition the coarse ones") {
  const auto coarse = build_mesh(2);
  const auto fine = build_mesh(4);
  std::vector<int> seen(fine.n_elems(), 0);
  for (int T = 0; T < coarse.n_elems(); ++T) {
    for (int fe : fine_elements_of_coarse(coarse, fine, T)) {
      ++seen[fe];
      const auto mid = fine.elem_midpoint(fe);
      CHECK(static_cast<int>(mid[0] * coarse.cells) == coarse.elem_i(T));
      CHECK(static_cast<int>(mid[1] * coarse.cells) == coarse.elem_j(T));
    }
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

TEST_CASE("prolongation reproduces bilinear functions") {
  const auto coarse = build_mesh(1);
  const auto fine = build_mesh(3);
  const SpMat P = prolongation_matrix(coarse, fine);

  const auto g = [](double x, double y) { return 1.5 + x - 2 * y + 3 * x * y; };
  Vec vc(coarse.n_verts());
  for (int v = 0; v < coarse.n_verts(); ++v) {
    const auto xy = coarse.vertex_coords(v);
    vc[v] = g(xy[0], xy[1]);
  }
  const Vec vf = P * vc;
  for (int v = 0; v < fine.n_verts(); ++v) {
    const auto xy = fine.vertex_coords(v);
    CHECK(vf[v] == doctest::Approx(g(xy[0], xy[1])).epsilon(1e-13));
  }

  // Partition of unity: each row sums to 1.
  const Vec ones = P * Vec::Ones(coarse.n_verts());
  CHECK((ones.array() - 1.0).abs().maxCoeff() < 1e-14);
  for (int k = 0; k < P.outerSize(); ++k)
    for (SpMat::InnerIterator it(P, k); it; ++it) CHECK(it.value() > 0.0);
}

TEST_CASE("prolongation edge cases") {
  const auto m2 = build_mesh(2);
  const SpMat I = prolongation_matrix(m2, m2);
  CHECK(I.nonZeros() == m2.n_verts());
  CHECK(SpMat(I - SpMat(Vec::Ones(m2.n_verts()).asDiagonal())).norm() == 0.0);

  const auto coarse = build_mesh(0);
  const auto fine = build_mesh(1);
  const SpMat P = prolongation_matrix(coarse, fine);
  const int center = fine.vertex_id(1, 1);
  Vec corners = Vec::Zero(coarse.n_verts());
  corners << 1, 2, 3, 4;
  CHECK((P * corners)[center] == doctest::Approx(2.5));

  CHECK_THROWS_AS(prolongation_matrix(fine, coarse), ArgumentError);
}

TEST_CASE("patch interior fine vertices honor patch boundary and Gamma") {
  const auto coarse = build_mesh(1);
  const auto fine = build_mesh(3);

  // Patch = element (0,0), i.e. [0,1/2]^2, refinement factor 4.
  const auto patch = element_patch(coarse, coarse.elem_id(0, 0), 0);

  // Full Dirichlet boundary: only strictly interior vertices survive.
  const auto full = patch_interior_fine_vertices(coarse, fine, patch,
                                                 BoundarySpec::FullBoundary);
  CHECK(full.size() == 9);

  // Left-edge Dirichlet: the bottom side y=0 is Neumann, so its vertices are
  // admissible; the x=0 side stays excluded.
  const auto left =
      patch_interior_fine_vertices(coarse, fine, patch, BoundarySpec::LeftEdge);
  CHECK(left.size() == 12);
  for (int v : left) {
    CHECK(fine.vertex_i(v) >= 1);
    CHECK(fine.vertex_i(v) <= 3);
    CHECK(fine.vertex_j(v) <= 3);
  }

  // A patch covering the whole mesh yields exactly the free vertices.
  const auto cover = element_patch(coarse, 0, coarse.cells);
  CHECK(patch_interior_fine_vertices(coarse, fine, cover, BoundarySpec::LeftEdge) ==
        free_vertices(fine, BoundarySpec::LeftEdge));
}

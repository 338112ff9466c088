#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"
#include "tidalfem/assembly.hpp"
#include "tidalfem/function_space.hpp"

using namespace tidalfem;
using testsupport::max_normal_jump;

TEST_CASE("space dimensions and boundary flags", "[spaces]") {
  Mesh rect = build_rect_mesh(2, 2);
  FunctionSpace v1 = build_space(rect, Family::RaviartThomas, 1);
  CHECK(v1.global_dim == 16);
  CHECK(v1.boundary_dofs.size() == 8);
  FunctionSpace v2 = build_space(rect, Family::RaviartThomas, 2);
  CHECK(v2.global_dim == 2 * 16 + 2 * 8);
  CHECK(v2.boundary_dofs.size() == 16);
  FunctionSpace w0 = build_space(rect, Family::Discontinuous, 0);
  CHECK(w0.global_dim == 8);
  FunctionSpace w1 = build_space(rect, Family::Discontinuous, 1);
  CHECK(w1.global_dim == 24);

  Mesh sph = build_icosphere(1);
  FunctionSpace vs = build_space(sph, Family::RaviartThomas, 1);
  CHECK(vs.global_dim == 120);
  CHECK(vs.boundary_dofs.empty());
  CHECK_THROWS_AS(build_space(sph, Family::RaviartThomas, 2), ValidationError);
  Mesh sph2 = build_icosphere(1, 2);
  CHECK_NOTHROW(build_space(sph2, Family::RaviartThomas, 2));
}

TEST_CASE("shared edges get opposite traversal signs", "[spaces]") {
  for (const Mesh& mesh : {build_rect_mesh(3, 2), build_icosphere(1)}) {
    std::vector<int> sign_sum(mesh.num_edges(), 0);
    std::vector<int> touches(mesh.num_edges(), 0);
    for (int c = 0; c < mesh.num_cells(); ++c) {
      for (int l = 0; l < 3; ++l) {
        sign_sum[mesh.cell_edges[c][l]] += mesh.cell_edge_signs[c][l];
        touches[mesh.cell_edges[c][l]] += 1;
      }
    }
    for (int e = 0; e < mesh.num_edges(); ++e) {
      if (touches[e] == 2) CHECK(sign_sum[e] == 0);
    }
  }
}

TEST_CASE("piola pull-back inverts the push-forward", "[spaces]") {
  Mesh sph = build_icosphere(1, 2);
  for (int c : {0, 7, 33}) {
    GeomEval ge = cell_geometry(sph, c, 0.21, 0.36);
    for (auto [vx, vy] : {std::pair{1.0, 0.0}, {0.0, 1.0}, {0.4, -1.3}}) {
      Vec3 pushed = piola_push_forward(ge, vx, vy);
      double bx, by;
      piola_pull_back(ge, pushed, bx, by);
      CHECK(bx == Catch::Approx(vx).margin(1e-12));
      CHECK(by == Catch::Approx(vy).margin(1e-12));
      // pushed vectors are tangent to the cell
      CHECK(std::abs(dot(pushed, ge.normal)) < 1e-12);
    }
  }
}

TEST_CASE("random fields are normal-continuous across interior edges", "[spaces]") {
  SECTION("planar, both orders") {
    Mesh mesh = build_rect_mesh(3, 3);
    for (int order : {1, 2}) {
      FunctionSpace V = build_space(mesh, Family::RaviartThomas, order);
      Field u(V);
      testsupport::fill_random(u.coeffs, 42 + order);
      CHECK(max_normal_jump(u) < 1e-11);
    }
  }
  SECTION("flat-facet sphere") {
    Mesh mesh = build_icosphere(1);
    FunctionSpace V = build_space(mesh, Family::RaviartThomas, 1);
    Field u(V);
    testsupport::fill_random(u.coeffs, 99);
    CHECK(max_normal_jump(u) < 1e-11);
  }
}

TEST_CASE("interpolation commutes with the divergence projection", "[spaces]") {
  // the probe field has zero normal trace on the unit square boundary, so
  // pinning the boundary dofs does not disturb the interpolant
  Mesh mesh = build_rect_mesh(3, 3);
  for (int order : {1, 2}) {
    INFO("order " << order);
    CHECK(testsupport::commuting_diagram_residual(mesh, order) < 1e-13);
  }
}

TEST_CASE("interpolation is exact on fields the space contains", "[spaces]") {
  Mesh mesh = build_rect_mesh(3, 3);
  // cells whose three edges are all interior
  std::vector<char> is_boundary_edge(mesh.num_edges(), 0);
  for (int e : mesh.boundary_edges) is_boundary_edge[e] = 1;
  auto interior_cell = [&](int c) {
    for (int l = 0; l < 3; ++l)
      if (is_boundary_edge[mesh.cell_edges[c][l]]) return false;
    return true;
  };
  int tested = 0;

  SECTION("constants in the lowest-order space") {
    FunctionSpace V = build_space(mesh, Family::RaviartThomas, 1);
    Field f = interpolate_hdiv(V, [](const Vec3&) { return Vec3{0.3, -0.7, 0.0}; });
    for (int c = 0; c < mesh.num_cells(); ++c) {
      if (!interior_cell(c)) continue;
      ++tested;
      Vec3 v = evaluate_vector_field(f, c, 0.25, 0.4);
      CHECK(v.x == Catch::Approx(0.3).margin(1e-13));
      CHECK(v.y == Catch::Approx(-0.7).margin(1e-13));
      CHECK(evaluate_divergence(f, c, 0.25, 0.4) == Catch::Approx(0.0).margin(1e-12));
    }
    CHECK(tested > 0);
  }
  SECTION("linears in the order-2 space") {
    FunctionSpace V = build_space(mesh, Family::RaviartThomas, 2);
    auto u = [](const Vec3& p) { return Vec3{1.0 + 2.0 * p.x - p.y, 3.0 - p.x + 4.0 * p.y, 0.0}; };
    Field f = interpolate_hdiv(V, u);
    for (int c = 0; c < mesh.num_cells(); ++c) {
      if (!interior_cell(c)) continue;
      ++tested;
      for (auto [x, y] : {std::pair{0.2, 0.3}, {0.5, 0.1}}) {
        GeomEval ge = cell_geometry(mesh, c, x, y);
        Vec3 v = evaluate_vector_field(f, c, x, y);
        Vec3 exact = u(ge.x);
        CHECK(v.x == Catch::Approx(exact.x).margin(1e-12));
        CHECK(v.y == Catch::Approx(exact.y).margin(1e-12));
        CHECK(evaluate_divergence(f, c, x, y) == Catch::Approx(6.0).margin(1e-11));
      }
    }
    CHECK(tested > 0);
  }
}

TEST_CASE("scalar projection reproduces what DG can represent", "[spaces]") {
  Mesh mesh = build_rect_mesh(2, 2);
  SECTION("piecewise constants hold cell means") {
    FunctionSpace W = build_space(mesh, Family::Discontinuous, 0);
    Field f = project_l2(W, [](const Vec3& p) { return p.x + 2.0 * p.y; });
    for (int c = 0; c < mesh.num_cells(); ++c) {
      Vec3 centroid = cell_geometry(mesh, c, 1.0 / 3.0, 1.0 / 3.0).x;
      CHECK(evaluate_scalar_field(f, c, 0.5, 0.2) ==
            Catch::Approx(centroid.x + 2.0 * centroid.y).margin(1e-13));
    }
  }
  SECTION("linears are exact in degree-1 DG") {
    FunctionSpace W = build_space(mesh, Family::Discontinuous, 1);
    Field f = project_l2(W, [](const Vec3& p) { return 2.0 - p.x + 3.0 * p.y; });
    for (int c = 0; c < mesh.num_cells(); ++c) {
      for (auto [x, y] : {std::pair{0.3, 0.3}, {0.1, 0.7}}) {
        GeomEval ge = cell_geometry(mesh, c, x, y);
        CHECK(evaluate_scalar_field(f, c, x, y) ==
              Catch::Approx(2.0 - ge.x.x + 3.0 * ge.x.y).margin(1e-12));
      }
    }
  }
}

TEST_CASE("total divergence vanishes on closed surfaces", "[spaces]") {
  // with no boundary every edge flux cancels between its two cells, so the
  // divergence of any discrete field integrates to zero over the sphere
  struct Case {
    Mesh mesh;
    int order;
  };
  std::vector<Case> cases;
  cases.push_back({build_icosphere(1), 1});
  cases.push_back({build_icosphere(1, 2), 2});
  for (const auto& cs : cases) {
    FunctionSpace V = build_space(cs.mesh, Family::RaviartThomas, cs.order);
    FunctionSpace W = build_space(cs.mesh, Family::Discontinuous, cs.order - 1);
    SparseMatrix B = assemble_div(V, W);
    Field u(V);
    testsupport::fill_random(u.coeffs, 7 * cs.order);
    std::vector<double> bu = B * u.coeffs;
    // sum against the constant-one DG function
    FunctionSpace* wp = &W;
    double total = 0.0;
    for (int c = 0; c < cs.mesh.num_cells(); ++c) {
      total += bu[wp->cell_dof(c, 0)];
      if (cs.order == 2) total += bu[wp->cell_dof(c, 1)] + bu[wp->cell_dof(c, 2)];
    }
    INFO("order " << cs.order);
    CHECK(std::abs(total) < 1e-12);
  }
}

TEST_CASE("space builders reject mismatched requests", "[spaces]") {
  Mesh mesh = build_rect_mesh(1, 1);
  CHECK_THROWS_AS(build_space(mesh, Family::Discontinuous, 2), ValidationError);
  FunctionSpace W = build_space(mesh, Family::Discontinuous, 0);
  CHECK_THROWS_AS(interpolate_hdiv(W, [](const Vec3&) { return Vec3{}; }), ValidationError);
  FunctionSpace V = build_space(mesh, Family::RaviartThomas, 1);
  CHECK_THROWS_AS(project_l2(V, [](const Vec3&) { return 0.0; }), ValidationError);
}

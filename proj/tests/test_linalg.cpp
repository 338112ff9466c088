#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"
#include "tidalfem/assembly.hpp"
#include "tidalfem/solvers.hpp"

using namespace tidalfem;
using testsupport::dense_from_sparse;

TEST_CASE("triplet compression sums duplicates in order", "[linalg]") {
  SparseMatrix m = SparseMatrix::from_triplets(
      3, 3, {{2, 1, 4.0}, {0, 0, 1.0}, {2, 1, -1.5}, {1, 2, 2.0}, {0, 0, 0.25}});
  auto d = dense_from_sparse(m);
  CHECK(d[0][0] == 1.25);
  CHECK(d[1][2] == 2.0);
  CHECK(d[2][1] == 2.5);
  CHECK(m.nnz() == 3);
  for (int r = 0; r < m.rows; ++r)
    for (int k = m.row_ptr[r] + 1; k < m.row_ptr[r + 1]; ++k)
      CHECK(m.col_idx[k - 1] < m.col_idx[k]);
  CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), ValidationError);
}

TEST_CASE("sparse products and transpose match dense arithmetic", "[linalg]") {
  std::vector<Triplet> trip;
  tidalfem::UniformDraw draw(11);
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 9; ++c)
      if (draw() > 0.2) trip.push_back({r, c, draw()});
  SparseMatrix a = SparseMatrix::from_triplets(12, 9, trip);
  auto ad = dense_from_sparse(a);

  std::vector<double> x(9);
  testsupport::fill_random(x, 5);
  std::vector<double> y = a * x;
  for (int r = 0; r < 12; ++r) {
    double s = 0.0;
    for (int c = 0; c < 9; ++c) s += ad[r][c] * x[c];
    CHECK(y[r] == Catch::Approx(s).margin(1e-14));
  }

  auto at = dense_from_sparse(a.transposed());
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 9; ++c) CHECK(at[c][r] == ad[r][c]);

  SparseMatrix b = SparseMatrix::from_triplets(12, 9, {{0, 0, 2.0}, {11, 8, -3.0}});
  auto sum = dense_from_sparse(sparse_add(2.0, a, 1.0, b));
  CHECK(sum[0][0] == Catch::Approx(2.0 * ad[0][0] + 2.0));
  CHECK(sum[11][8] == Catch::Approx(2.0 * ad[11][8] - 3.0));
  CHECK_THROWS_AS(sparse_add(1.0, a, 1.0, SparseMatrix::from_triplets(2, 2, {})),
                  ValidationError);
}

TEST_CASE("conjugate gradients agrees with a direct solve", "[linalg]") {
  // random SPD matrix A = G^T G + I
  const int n = 24;
  std::vector<std::vector<double>> g(n, std::vector<double>(n));
  tidalfem::UniformDraw draw(17);
  for (auto& row : g)
    for (auto& v : row) v = draw();
  std::vector<std::vector<double>> ad(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) ad[i][j] += g[k][i] * g[k][j];
      if (i == j) ad[i][j] += 1.0;
    }
  std::vector<Triplet> trip;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) trip.push_back({i, j, ad[i][j]});
  SparseMatrix a = SparseMatrix::from_triplets(n, n, trip);

  std::vector<double> b(n);
  testsupport::fill_random(b, 3);
  std::vector<double> x = solve_spd(a, b, {1e-12, 0, 50});
  std::vector<double> x_ref = testsupport::dense_solve(ad, b);
  CHECK(testsupport::max_abs_diff(x, x_ref) < 1e-9);

  SECTION("zero right-hand side returns zero") {
    std::vector<double> z = solve_spd(a, std::vector<double>(n, 0.0));
    for (double v : z) CHECK(v == 0.0);
  }
  SECTION("indefinite matrices are reported") {
    SparseMatrix neg = sparse_scaled(-1.0, a);
    CHECK_THROWS_AS(solve_spd(neg, b), SolverError);
  }
  SECTION("empty rows ride along at zero") {
    std::vector<Triplet> t2;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != 5 && j != 5) t2.push_back({i, j, ad[i][j]});
    SparseMatrix a2 = SparseMatrix::from_triplets(n, n, t2);
    std::vector<double> b2 = b;
    b2[5] = 0.0;
    std::vector<double> x2 = solve_spd(a2, b2, {1e-12, 0, 50});
    CHECK(x2[5] == 0.0);
  }
}

TEST_CASE("CG solves an assembled mass system", "[linalg]") {
  Mesh mesh = build_rect_mesh(3, 3);
  FunctionSpace V = build_space(mesh, Family::RaviartThomas, 1);
  SparseMatrix m = assemble_weighted_mass_v(V, [](const Vec3&) { return 1.0; });
  std::vector<double> b(V.global_dim);
  testsupport::fill_random(b, 8);
  for (int d : V.boundary_dofs) b[d] = 0.0;
  std::vector<double> x = solve_spd(m, b, {1e-12, 0, 50});
  std::vector<double> r = m * x;
  for (int d : V.boundary_dofs) CHECK(x[d] == 0.0);
  double rnorm = 0.0, bnorm = 0.0;
  for (size_t i = 0; i < b.size(); ++i) {
    rnorm += (r[i] - b[i]) * (r[i] - b[i]);
    bnorm += b[i] * b[i];
  }
  CHECK(std::sqrt(rnorm / bnorm) < 1e-10);
}

TEST_CASE("GMRES matches the direct solve on a nonsymmetric system", "[linalg]") {
  const int n = 30;
  std::vector<std::vector<double>> ad(n, std::vector<double>(n, 0.0));
  tidalfem::UniformDraw draw(23);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) ad[i][j] = 0.3 * draw();
    ad[i][i] += 4.0;
  }
  std::vector<Triplet> trip;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) trip.push_back({i, j, ad[i][j]});
  SparseMatrix a = SparseMatrix::from_triplets(n, n, trip);
  std::vector<double> b(n);
  testsupport::fill_random(b, 29);

  SECTION("single cycle") {
    std::vector<double> x = solve_general(a, b, {1e-12, 0, 50});
    CHECK(testsupport::max_abs_diff(x, testsupport::dense_solve(ad, b)) < 1e-9);
  }
  SECTION("restarted") {
    std::vector<double> x = solve_general(a, b, {1e-12, 0, 7});
    CHECK(testsupport::max_abs_diff(x, testsupport::dense_solve(ad, b)) < 1e-9);
  }
  SECTION("iteration cap is enforced") {
    CHECK_THROWS_AS(solve_general(a, b, {1e-14, 2, 2}), SolverError);
    try {
      solve_general(a, b, {1e-14, 2, 2});
    } catch (const SolverError& e) {
      CHECK(e.iterations <= 3);
      CHECK(e.residual > 0.0);
    }
  }
}

TEST_CASE("block-diagonal inverse is exact", "[linalg]") {
  std::vector<Triplet> trip;
  tidalfem::UniformDraw draw(31);
  const int nb = 4, k = 3;
  for (int c = 0; c < nb; ++c)
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        trip.push_back({c * k + i, c * k + j, (i == j ? 3.0 : 0.0) + 0.5 * draw()});
  SparseMatrix m = SparseMatrix::from_triplets(nb * k, nb * k, trip);
  CellBlockInverse inv = CellBlockInverse::from_block_diagonal(m, k);
  std::vector<double> b(nb * k);
  testsupport::fill_random(b, 37);
  std::vector<double> x = inv.solve(b);
  std::vector<double> mx = m * x;
  CHECK(testsupport::max_abs_diff(mx, b) < 1e-12);

  SparseMatrix off = SparseMatrix::from_triplets(6, 6, {{0, 5, 1.0}, {0, 0, 1.0}, {5, 5, 1.0}});
  CHECK_THROWS_AS(CellBlockInverse::from_block_diagonal(off, 3), ValidationError);
}

TEST_CASE("block saddle solve matches the dense oracle", "[linalg]") {
  Mesh mesh = build_rect_mesh(2, 2);
  FunctionSpace V = build_space(mesh, Family::RaviartThomas, 1);
  FunctionSpace W = build_space(mesh, Family::Discontinuous, 0);
  SparseMatrix M = assemble_weighted_mass_v(V, [](const Vec3&) { return 1.0; });
  SparseMatrix B = assemble_div(V, W);
  SparseMatrix Bt = B.transposed();
  SparseMatrix MW = assemble_mass_w(W);
  CellBlockInverse MWinv = CellBlockInverse::from_block_diagonal(MW, 1);
  const int nu = V.global_dim, np = W.global_dim;

  BlockSystem sys;
  sys.A = &M;
  sys.Bt = &Bt;
  sys.B = &B;
  sys.D = &MW;
  sys.scale_Bt = -0.5;
  sys.scale_B = 0.5;
  sys.nu = nu;
  sys.np = np;

  // dense copy of the block operator
  std::vector<std::vector<double>> dense(nu + np, std::vector<double>(nu + np, 0.0));
  auto md = dense_from_sparse(M);
  auto bd = dense_from_sparse(B);
  auto btd = dense_from_sparse(Bt);
  auto mwd = dense_from_sparse(MW);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nu; ++j) dense[i][j] = md[i][j];
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < np; ++j) dense[i][nu + j] = -0.5 * btd[i][j];
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < nu; ++j) dense[nu + i][j] = 0.5 * bd[i][j];
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < np; ++j) dense[nu + i][nu + j] = mwd[i][j];
  // boundary velocity dofs have empty rows; make the dense system identity
  // there so both solutions pin them to zero
  for (int d : V.boundary_dofs) dense[d][d] = 1.0;

  std::vector<double> b(nu + np);
  testsupport::fill_random(b, 41);
  for (int d : V.boundary_dofs) b[d] = 0.0;

  BlockDiagPreconditioner pre;
  pre.Su = &M;
  pre.Sp = &MWinv;
  pre.nu = nu;
  pre.np = np;
  std::vector<double> x = solve_block(sys, b, pre, {1e-12, 0, 60});
  std::vector<double> x_ref = testsupport::dense_solve(dense, b);
  CHECK(testsupport::max_abs_diff(x, x_ref) < 1e-8);
}

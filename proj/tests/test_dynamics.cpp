#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"
#include "tidalfem/diagnostics.hpp"

using namespace tidalfem;
using testsupport::dense_from_sparse;
using testsupport::dense_solve;

namespace {

ModelParams planar_params() {
  ModelParams p;
  p.epsilon = 0.2;
  p.beta = 0.3;
  p.f = [](const Vec3& x) { return 1.0 + 0.4 * x.x - 0.2 * x.y; };
  p.C = [](const Vec3& x) { return 0.15 + 0.05 * x.x; };
  p.H = [](const Vec3& x) { return 1.0 + 0.1 * x.y; };
  return p;
}

ForcingSpec mixed_forcing() {
  ForcingSpec f;
  f.pointwise = [](const Vec3& x, double t) {
    return Vec3{std::sin(x.x + t), std::cos(x.y - 0.3 * t), 0.0};
  };
  f.potential = [](const Vec3& x, double) { return x.x * x.y; };
  f.gain = -1.3;
  return f;
}

// Dense mirror of the velocity block M/dt + (R+Mc)/2 with identity rows at
// eliminated boundary dofs.
std::vector<std::vector<double>> dense_velocity_block(const DiscreteOperators& ops, double dt) {
  auto M = dense_from_sparse(ops.M);
  auto R = dense_from_sparse(ops.R);
  auto Mc = dense_from_sparse(ops.Mc);
  int nu = ops.V->global_dim;
  std::vector<std::vector<double>> A(nu, std::vector<double>(nu, 0.0));
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nu; ++j) A[i][j] = M[i][j] / dt + 0.5 * (R[i][j] + Mc[i][j]);
  for (int d : ops.V->boundary_dofs) A[d][d] = 1.0;
  return A;
}

}  // namespace

TEST_CASE("implicit midpoint conserves energy without drag or forcing", "[dynamics]") {
  Mesh mesh = build_icosphere(1);
  FunctionSpace V = build_space(mesh, Family::RaviartThomas, 1);
  FunctionSpace W = build_space(mesh, Family::Discontinuous, 0);
  ModelParams p;
  p.H = [](const Vec3& x) { return 1.0 + 0.1 * std::exp(-x.x * x.x); };
  DiscreteOperators ops = build_operators(V, W, p);
  State s = make_random_state(V, W, ops, 42);
  double e0 = energy_first_order(s, ops);
  REQUIRE(e0 > 0.0);

  MidpointStepper stepper(ops, 0.02, SolverConfig{1e-13, 0, 60});
  for (int k = 0; k < 5; ++k) {
    stepper.advance(s, ForcingSpec::zero());
    double e = energy_first_order(s, ops);
    CHECK(std::abs(e - e0) <= 1e-10 * e0);
  }
}

TEST_CASE("implicit midpoint step matches a dense block solve", "[dynamics]") {
  Mesh mesh = build_rect_mesh(2, 2);
  FunctionSpace V = build_space(mesh, Family::RaviartThomas, 1);
  FunctionSpace W = build_space(mesh, Family::Discontinuous, 0);
  ModelParams p = planar_params();
  DiscreteOperators ops = build_operators(V, W, p);
  ForcingSpec forcing = mixed_forcing();
  double dt = 0.05;

  State s = make_random_state(V, W, ops, 7);
  s.t = 0.6;

  int nu = V.global_dim, np = W.global_dim;
  std::vector<double> rho = detail::momentum_residual(ops, s, forcing, s.t + 0.5 * dt);
  std::vector<double> bu = ops.B * s.u.coeffs;
  for (double v : bu) rho.push_back(-v);

  auto big = dense_velocity_block(ops, dt);
  for (auto& row : big) row.resize(nu + np, 0.0);
  big.resize(nu + np, std::vector<double>(nu + np, 0.0));
  auto Bt = dense_from_sparse(ops.Bt);
  auto B = dense_from_sparse(ops.B);
  auto MW = dense_from_sparse(ops.MW);
  double sbt = -0.5 * ops.beta_over_eps2;
  for (int i = 0; i < nu; ++i)
    for (int k = 0; k < np; ++k) big[i][nu + k] = sbt * Bt[i][k];
  for (int k = 0; k < np; ++k) {
    for (int i = 0; i < nu; ++i) big[nu + k][i] = 0.5 * B[k][i];
    for (int l = 0; l < np; ++l) big[nu + k][nu + l] = MW[k][l] / dt;
  }
  std::vector<double> delta = dense_solve(big, rho);

  State ref = s;
  for (int i = 0; i < nu; ++i) ref.u.coeffs[i] += delta[i];
  for (int k = 0; k < np; ++k) ref.eta.coeffs[k] += delta[nu + k];

  MidpointStepper stepper(ops, dt, SolverConfig{1e-12, 0, 60});
  stepper.advance(s, forcing);
  CHECK(s.t == Catch::Approx(0.65));
  CHECK(testsupport::max_abs_diff(s.u.coeffs, ref.u.coeffs) < 5e-9);
  CHECK(testsupport::max_abs_diff(s.eta.coeffs, ref.eta.coeffs) < 5e-9);
}

TEST_CASE("midpoint energy decrement equals the midpoint drag work", "[dynamics]") {
  Mesh mesh = build_icosphere(1);
  FunctionSpace V = build_space(mesh, Family::RaviartThomas, 1);
  FunctionSpace W = build_space(mesh, Family::Discontinuous, 0);
  ModelParams p;
  p.C = [](const Vec3&) { return 0.4; };
  DiscreteOperators ops = build_operators(V, W, p);
  State s = make_random_state(V, W, ops, 11);
  double dt = 0.03;
  double e0 = energy_first_order(s, ops);
  std::vector<double> u_old = s.u.coeffs;

  MidpointStepper stepper(ops, dt, SolverConfig{1e-13, 0, 60});
  stepper.advance(s, ForcingSpec::zero());
  double e1 = energy_first_order(s, ops);

  std::vector<double> ubar(u_old.size());
  for (size_t i = 0; i < ubar.size(); ++i) ubar[i] = 0.5 * (u_old[i] + s.u.coeffs[i]);
  double work = la::dot(ubar, ops.Mc * ubar);
  CHECK(e1 < e0);
  CHECK(std::abs((e1 - e0) + dt * work) <= 1e-10 * e0);
}

TEST_CASE("steppers are linear in the state", "[dynamics]") {
  Mesh mesh = build_rect_mesh(2, 2);
  FunctionSpace V = build_space(mesh, Family::RaviartThomas, 1);
  FunctionSpace W = build_space(mesh, Family::Discontinuous, 0);
  DiscreteOperators ops = build_operators(V, W, planar_params());
  const double alpha = -3.5;

  State a = make_random_state(V, W, ops, 19);
  State b = a;
  for (auto& c : b.u.coeffs) c *= alpha;
  for (auto& c : b.eta.coeffs) c *= alpha;

  SECTION("implicit midpoint") {
    MidpointStepper sa(ops, 0.04, SolverConfig{1e-12, 0, 60});
    MidpointStepper sb(ops, 0.04, SolverConfig{1e-12, 0, 60});
    sa.advance(a, ForcingSpec::zero());
    sb.advance(b, ForcingSpec::zero());
    for (int i = 0; i < V.global_dim; ++i)
      CHECK(b.u.coeffs[i] == Catch::Approx(alpha * a.u.coeffs[i]).margin(1e-8));
    for (int i = 0; i < W.global_dim; ++i)
      CHECK(b.eta.coeffs[i] == Catch::Approx(alpha * a.eta.coeffs[i]).margin(1e-8));
  }
  SECTION("symplectic euler") {
    SymplecticStepper sa(ops, 0.04, SolverConfig{1e-12, 0, 60});
    SymplecticStepper sb(ops, 0.04, SolverConfig{1e-12, 0, 60});
    sa.advance(a, ForcingSpec::zero());
    sb.advance(b, ForcingSpec::zero());
    for (int i = 0; i < V.global_dim; ++i)
      CHECK(b.u.coeffs[i] == Catch::Approx(alpha * a.u.coeffs[i]).margin(1e-8));
  }
}

TEST_CASE("runs are reproducible bit for bit", "[dynamics]") {
  Mesh mesh = build_icosphere(0);
  FunctionSpace V = build_space(mesh, Family::RaviartThomas, 1);
  FunctionSpace W = build_space(mesh, Family::Discontinuous, 0);
  DiscreteOperators ops = build_operators(V, W, ModelParams{});
  State s0 = make_random_state(V, W, ops, 5);
  ForcingSpec f = mixed_forcing();

  for (Scheme scheme : {Scheme::ImplicitMidpoint, Scheme::SymplecticEuler}) {
    StepperConfig cfg;
    cfg.scheme = scheme;
    cfg.dt = 0.02;
    Trajectory t1 = run(s0, ops, f, cfg, 3);
    Trajectory t2 = run(s0, ops, f, cfg, 3);
    REQUIRE(t1.final_state.u.coeffs.size() == t2.final_state.u.coeffs.size());
    for (size_t i = 0; i < t1.final_state.u.coeffs.size(); ++i)
      CHECK(t1.final_state.u.coeffs[i] == t2.final_state.u.coeffs[i]);
    for (size_t i = 0; i < t1.final_state.eta.coeffs.size(); ++i)
      CHECK(t1.final_state.eta.coeffs[i] == t2.final_state.eta.coeffs[i]);
  }
}

TEST_CASE("symplectic euler step matches its two-stage closed form", "[dynamics]") {
  Mesh mesh = build_rect_mesh(2, 2);
  FunctionSpace V = build_space(mesh, Family::RaviartThomas, 1);
  FunctionSpace W = build_space(mesh, Family::Discontinuous, 0);
  DiscreteOperators ops = build_operators(V, W, planar_params());
  ForcingSpec forcing = mixed_forcing();
  double dt = 0.05;

  State s = make_random_state(V, W, ops, 23);
  s.t = 0.25;

  std::vector<double> rho = detail::momentum_residual(ops, s, forcing, s.t);
  std::vector<double> delta = dense_solve(dense_velocity_block(ops, dt), rho);
  State ref = s;
  for (int i = 0; i < V.global_dim; ++i) ref.u.coeffs[i] += delta[i];
  std::vector<double> deta = dense_solve(dense_from_sparse(ops.MW), ops.B * ref.u.coeffs);
  for (int k = 0; k < W.global_dim; ++k) ref.eta.coeffs[k] -= dt * deta[k];

  SymplecticStepper stepper(ops, dt, SolverConfig{1e-12, 0, 60});
  stepper.advance(s, forcing);
  CHECK(s.t == Catch::Approx(0.30));
  CHECK(testsupport::max_abs_diff(s.u.coeffs, ref.u.coeffs) < 5e-9);
  CHECK(testsupport::max_abs_diff(s.eta.coeffs, ref.eta.coeffs) < 5e-9);
}

TEST_CASE("manufactured solution balances continuity exactly", "[dynamics]") {
  Mesh flat = build_icosphere(1);
  FunctionSpace W0 = build_space(flat, Family::Discontinuous, 0);
  Mesh curved = build_icosphere(1, 2);
  FunctionSpace W1 = build_space(curved, Family::Discontinuous, 1);
  for (double omega : {2.0, 5.0}) {
    ManufacturedSolution ms = make_sphere_mms(omega);
    CHECK(mms_continuity_residual(ms, W0) <= 1e-13);
    CHECK(mms_continuity_residual(ms, W1) <= 1e-13);
  }
  CHECK_THROWS_AS(make_sphere_mms(0.0), ValidationError);
}

TEST_CASE("stepper and model validation", "[dynamics]") {
  Mesh mesh = build_rect_mesh(1, 1);
  FunctionSpace V = build_space(mesh, Family::RaviartThomas, 1);
  FunctionSpace W = build_space(mesh, Family::Discontinuous, 0);
  DiscreteOperators ops = build_operators(V, W, ModelParams{});
  SolverConfig cfg{1e-10, 0, 50};
  CHECK_THROWS_AS(MidpointStepper(ops, 0.0, cfg), ValidationError);
  CHECK_THROWS_AS(SymplecticStepper(ops, -0.1, cfg), ValidationError);

  ModelParams bad;
  bad.epsilon = 0.0;
  CHECK_THROWS_AS(build_operators(V, W, bad), ValidationError);
  bad = ModelParams{};
  bad.beta = -1.0;
  CHECK_THROWS_AS(build_operators(V, W, bad), ValidationError);
  bad = ModelParams{};
  bad.H = [](const Vec3&) { return 1e-9; };  // below the H_star floor
  CHECK_THROWS_AS(build_operators(V, W, bad), ValidationError);

  State s = make_random_state(V, W, ops, 1);
  CHECK_THROWS_AS(run(s, ops, ForcingSpec::zero(), StepperConfig{}, -1), ValidationError);
}

TEST_CASE("trajectory records observers per step", "[dynamics]") {
  Mesh mesh = build_rect_mesh(2, 2);
  FunctionSpace V = build_space(mesh, Family::RaviartThomas, 1);
  FunctionSpace W = build_space(mesh, Family::Discontinuous, 0);
  DiscreteOperators ops = build_operators(V, W, planar_params());
  State s = make_random_state(V, W, ops, 3);

  StepperConfig cfg;
  cfg.dt = 0.1;
  std::vector<Observer> obs{{"E1", [&](const State& st) { return energy_first_order(st, ops); }}};
  Trajectory traj = run(s, ops, ForcingSpec::zero(), cfg, 4, obs);

  REQUIRE(traj.columns.size() == 2);
  CHECK(traj.columns[0] == "t");
  CHECK(traj.columns[1] == "E1");
  REQUIRE(traj.rows.size() == 5);
  for (int k = 0; k <= 4; ++k) {
    CHECK(traj.rows[k][0] == Catch::Approx(0.1 * k).margin(1e-14));
    CHECK(traj.rows[k][1] > 0.0);
  }
  CHECK(traj.final_state.t == Catch::Approx(0.4));

  // zero steps still records the initial state
  Trajectory empty = run(s, ops, ForcingSpec::zero(), cfg, 0, obs);
  CHECK(empty.rows.size() == 1);
}

#ifndef TIDALFEM_DYNAMICS_HPP
#define TIDALFEM_DYNAMICS_HPP

#include <memory>
#include <string>
#include <vector>

#include "tidalfem/assembly.hpp"

namespace tidalfem {

// Nondimensional model parameters.  f, C, H are closed-form coefficient
// fields evaluated at quadrature points; H must stay above H_star and C must
// be nonnegative.
struct ModelParams {
  double epsilon = 0.1;
  double beta = 0.1;
  CoefficientField f = [](const Vec3&) { return 1.0; };
  CoefficientField C = [](const Vec3&) { return 0.0; };
  CoefficientField H = [](const Vec3&) { return 1.0; };
  double H_star = 1e-8;

  double beta_over_eps2() const { return beta / (epsilon * epsilon); }
};

struct State {
  Field u;
  Field eta;
  double t = 0.0;
};

enum class Scheme { ImplicitMidpoint, SymplecticEuler };

struct StepperConfig {
  Scheme scheme = Scheme::ImplicitMidpoint;
  double dt = 0.01;
  SolverConfig solver{1e-10, 0, 50};
};

// Matrices shared by steppers and diagnostics for one (mesh, spaces, params)
// combination.
struct DiscreteOperators {
  const FunctionSpace* V = nullptr;
  const FunctionSpace* W = nullptr;
  SparseMatrix M;    // (1/H)-weighted velocity mass
  SparseMatrix Mc;   // (C/H)-weighted drag mass
  SparseMatrix R;    // f/(eps H) rotation
  SparseMatrix B;    // divergence pairing
  SparseMatrix Bt;
  SparseMatrix MW;   // DG mass
  CellBlockInverse MWinv;
  std::vector<double> mw_row_sums;  // M_W * 1, for mean projection
  double beta_over_eps2 = 0.0;
};

inline DiscreteOperators build_operators(const FunctionSpace& V, const FunctionSpace& W,
                                         const ModelParams& params) {
  if (params.epsilon <= 0.0 || params.beta <= 0.0)
    throw ValidationError("epsilon and beta must be positive");
  DiscreteOperators ops;
  ops.V = &V;
  ops.W = &W;
  const ModelParams p = params;  // capture by value in the weights
  CoefficientField inv_H = [p](const Vec3& x) {
    double h = p.H(x);
    if (h < p.H_star) throw ValidationError("depth fell below H_star");
    return 1.0 / h;
  };
  CoefficientField drag = [p](const Vec3& x) { return p.C(x) / p.H(x); };
  CoefficientField rot = [p](const Vec3& x) { return p.f(x) / (p.epsilon * p.H(x)); };
  ops.M = assemble_weighted_mass_v(V, inv_H);
  ops.Mc = assemble_weighted_mass_v(V, drag, /*allow_zero_weight=*/true);
  ops.R = assemble_perp(V, rot);
  ops.B = assemble_div(V, W);
  ops.Bt = ops.B.transposed();
  ops.MW = assemble_mass_w(W);
  ops.MWinv = CellBlockInverse::from_block_diagonal(ops.MW, W.dofs_per_cell);
  ops.mw_row_sums.assign(W.global_dim, 0.0);
  for (int r = 0; r < ops.MW.rows; ++r)
    for (int k = ops.MW.row_ptr[r]; k < ops.MW.row_ptr[r + 1]; ++k)
      ops.mw_row_sums[r] += ops.MW.vals[k];
  ops.beta_over_eps2 = params.beta_over_eps2();
  return ops;
}

// Inner-CG application of an SPD matrix inverse, used to precondition the
// velocity block.
struct SpdInverseOperator : LinearOperator {
  const SparseMatrix* S = nullptr;
  SolverConfig inner{1e-12, 0, 50};
  int rows() const override { return S->rows; }
  int cols() const override { return S->cols; }
  void apply(const double* x, double* y) const override {
    std::vector<double> b(x, x + S->rows);
    std::vector<double> sol = solve_spd(*S, b, inner);
    std::copy(sol.begin(), sol.end(), y);
  }
};

namespace detail {

// steady-part residual of the momentum equation:
//   rho_u = b_F(t_f) - (R + Mc) u + (beta/eps^2) Bt eta
inline std::vector<double> momentum_residual(const DiscreteOperators& ops, const State& s,
                                             const ForcingSpec& forcing, double t_forcing) {
  std::vector<double> rho = assemble_momentum_rhs(*ops.V, forcing, t_forcing);
  std::vector<double> tmp = ops.R * s.u.coeffs;
  for (size_t i = 0; i < rho.size(); ++i) rho[i] -= tmp[i];
  tmp = ops.Mc * s.u.coeffs;
  for (size_t i = 0; i < rho.size(); ++i) rho[i] -= tmp[i];
  tmp = ops.Bt * s.eta.coeffs;
  for (size_t i = 0; i < rho.size(); ++i) rho[i] += ops.beta_over_eps2 * tmp[i];
  return rho;
}

}  // namespace detail

// One implicit midpoint step.  Solved in increment form: with
// A = [M/dt + (R+Mc)/2, -(beta/2eps^2) Bt; B/2, MW/dt], the update solves
// A (x' - x) = (steady residual at x), which keeps solver tolerances acting
// on the slow dynamics rather than on M x / dt.
struct MidpointStepper {
  const DiscreteOperators* ops;
  double dt;
  SolverConfig solver;
  SparseMatrix A_uu, Su, D;
  BlockSystem sys;
  BlockDiagPreconditioner pre;
  std::vector<double> prev_delta;

  MidpointStepper(const DiscreteOperators& o, double dt_, SolverConfig cfg)
      : ops(&o), dt(dt_), solver(cfg) {
    if (dt <= 0.0) throw ValidationError("dt must be positive");
    SparseMatrix RpMc = sparse_add(1.0, o.R, 1.0, o.Mc);
    A_uu = sparse_add(1.0 / dt, o.M, 0.5, RpMc);
    Su = sparse_add(1.0 / dt, o.M, 0.5, o.Mc);
    D = sparse_scaled(1.0 / dt, o.MW);
    sys.A = &A_uu;
    sys.Bt = &o.Bt;
    sys.B = &o.B;
    sys.D = &D;
    sys.scale_Bt = -0.5 * o.beta_over_eps2;
    sys.scale_B = 0.5;
    sys.nu = o.V->global_dim;
    sys.np = o.W->global_dim;
    pre.Su = &Su;
    pre.Sp = &o.MWinv;
    pre.sp_scale = 1.0 / dt;
    pre.nu = sys.nu;
    pre.np = sys.np;
    pre.inner.rel_tol = std::min(1e-12, cfg.rel_tol);
  }

  void advance(State& s, const ForcingSpec& forcing) {
    std::vector<double> rho = detail::momentum_residual(*ops, s, forcing, s.t + 0.5 * dt);
    std::vector<double> bu = ops->B * s.u.coeffs;
    for (double v : bu) rho.push_back(-v);
    std::vector<double> delta =
        solve_general(sys, rho, solver, &pre, prev_delta.empty() ? nullptr : &prev_delta);
    prev_delta = delta;
    for (int i = 0; i < sys.nu; ++i) s.u.coeffs[i] += delta[i];
    for (int i = 0; i < sys.np; ++i) s.eta.coeffs[i] += delta[sys.nu + i];
    s.t += dt;
  }
};

// One forward-in-eta, midpoint-in-u step: the momentum solve averages the
// rotation and drag terms, the pressure term uses eta at the old time, and
// the eta update needs only the block-diagonal DG mass inverse.
struct SymplecticStepper {
  const DiscreteOperators* ops;
  double dt;
  SolverConfig solver;
  SparseMatrix A_u, Su;
  SpdInverseOperator pre;
  std::vector<double> prev_delta;

  SymplecticStepper(const DiscreteOperators& o, double dt_, SolverConfig cfg)
      : ops(&o), dt(dt_), solver(cfg) {
    if (dt <= 0.0) throw ValidationError("dt must be positive");
    SparseMatrix RpMc = sparse_add(1.0, o.R, 1.0, o.Mc);
    A_u = sparse_add(1.0 / dt, o.M, 0.5, RpMc);
    Su = sparse_add(1.0 / dt, o.M, 0.5, o.Mc);
    pre.S = &Su;
    pre.inner.rel_tol = std::min(1e-12, cfg.rel_tol);
  }

  void advance(State& s, const ForcingSpec& forcing) {
    std::vector<double> rho = detail::momentum_residual(*ops, s, forcing, s.t);
    SparseOperator op(A_u);
    std::vector<double> delta =
        solve_general(op, rho, solver, &pre, prev_delta.empty() ? nullptr : &prev_delta);
    prev_delta = delta;
    for (size_t i = 0; i < delta.size(); ++i) s.u.coeffs[i] += delta[i];
    std::vector<double> div_u = ops->B * s.u.coeffs;
    std::vector<double> deta = ops->MWinv.solve(div_u);
    for (size_t i = 0; i < deta.size(); ++i) s.eta.coeffs[i] -= dt * deta[i];
    s.t += dt;
  }
};

inline void step_implicit_midpoint(State& s, const DiscreteOperators& ops,
                                   const ForcingSpec& forcing, const StepperConfig& cfg) {
  MidpointStepper stepper(ops, cfg.dt, cfg.solver);
  stepper.advance(s, forcing);
}

inline void step_symplectic_euler(State& s, const DiscreteOperators& ops,
                                  const ForcingSpec& forcing, const StepperConfig& cfg) {
  SymplecticStepper stepper(ops, cfg.dt, cfg.solver);
  stepper.advance(s, forcing);
}

// Named per-step diagnostic callback.
struct Observer {
  std::string name;
  std::function<double(const State&)> fn;
};

struct Trajectory {
  std::vector<std::string> columns;  // "t" first
  std::vector<std::vector<double>> rows;
  State final_state;
};

// Advance n_steps from the initial state, recording every observer once for
// the initial state and once after each step.
inline Trajectory run(const State& initial, const DiscreteOperators& ops,
                      const ForcingSpec& forcing, const StepperConfig& cfg, int n_steps,
                      const std::vector<Observer>& observers = {}) {
  if (n_steps < 0) throw ValidationError("n_steps must be >= 0");
  Trajectory traj;
  traj.columns.push_back("t");
  for (const auto& ob : observers) traj.columns.push_back(ob.name);
  State s = initial;
  auto record = [&]() {
    std::vector<double> row{s.t};
    for (const auto& ob : observers) row.push_back(ob.fn(s));
    traj.rows.push_back(std::move(row));
  };
  record();
  if (cfg.scheme == Scheme::ImplicitMidpoint) {
    MidpointStepper stepper(ops, cfg.dt, cfg.solver);
    for (int k = 0; k < n_steps; ++k) {
      stepper.advance(s, forcing);
      record();
    }
  } else {
    SymplecticStepper stepper(ops, cfg.dt, cfg.solver);
    for (int k = 0; k < n_steps; ++k) {
      stepper.advance(s, forcing);
      record();
    }
  }
  traj.final_state = std::move(s);
  return traj;
}

// Time-periodic exact solution on the unit sphere built from the degree-3
// harmonic xyz: u is cos(omega t) times a tangent gradient field and eta is
// scaled so the continuity equation holds exactly for any omega.
struct ManufacturedSolution {
  std::function<Vec3(const Vec3&, double)> u, u_t;
  std::function<double(const Vec3&, double)> eta, eta_t, div_u;
  double omega = 2.0;
};

inline ManufacturedSolution make_sphere_mms(double omega = 2.0) {
  if (omega == 0.0) throw ValidationError("omega must be nonzero");
  auto base = [](const Vec3& p) {
    return Vec3{-(1.0 / 12.0) * p.y * p.z * (1.0 - 3.0 * p.x * p.x),
                -(1.0 / 12.0) * p.x * p.z * (1.0 - 3.0 * p.y * p.y),
                -(1.0 / 12.0) * p.x * p.y * (1.0 - 3.0 * p.z * p.z)};
  };
  ManufacturedSolution ms;
  ms.omega = omega;
  ms.u = [base, omega](const Vec3& p, double t) { return std::cos(omega * t) * base(p); };
  ms.u_t = [base, omega](const Vec3& p, double t) {
    return (-omega * std::sin(omega * t)) * base(p);
  };
  ms.eta = [omega](const Vec3& p, double t) {
    return -std::sin(omega * t) * p.x * p.y * p.z / omega;
  };
  ms.eta_t = [omega](const Vec3& p, double t) { return -std::cos(omega * t) * p.x * p.y * p.z; };
  ms.div_u = [omega](const Vec3& p, double t) { return std::cos(omega * t) * p.x * p.y * p.z; };
  return ms;
}

// Forcing that makes the manufactured pair satisfy the momentum equation:
// (F, v) = (H^-1 u_t + f/(eps H) u-perp + C/H u, v) - (beta/eps^2)(eta, div v).
// dim selects the perp convention (3: n x u with radial n, 2: planar rotation).
inline ForcingSpec mms_forcing(const ManufacturedSolution& ms, const ModelParams& params,
                               int dim = 3) {
  const ModelParams p = params;
  ForcingSpec f;
  f.pointwise = [ms, p, dim](const Vec3& x, double t) {
    Vec3 u = ms.u(x, t);
    Vec3 ut = ms.u_t(x, t);
    Vec3 uperp = dim == 2 ? Vec3{-u.y, u.x, 0.0} : cross(normalized(x), u);
    double H = p.H(x);
    Vec3 out = (1.0 / H) * ut;
    out += (p.f(x) / (p.epsilon * H)) * uperp;
    out += (p.C(x) / H) * u;
    return out;
  };
  f.potential = [ms](const Vec3& x, double t) { return ms.eta(x, t); };
  f.gain = -params.beta_over_eps2();
  return f;
}

// Weak continuity residual of a manufactured solution projected on W:
// || pi(eta_t + div u) || / || pi(eta_t) || at a few sample times.
inline double mms_continuity_residual(const ManufacturedSolution& ms, const FunctionSpace& W) {
  double worst = 0.0;
  for (double t : {0.0, 0.17, 0.3}) {
    Field r = project_l2(W, [&](const Vec3& x) { return ms.eta_t(x, t) + ms.div_u(x, t); });
    Field s = project_l2(W, [&](const Vec3& x) { return ms.eta_t(x, t); });
    double rn = 0, sn = 0;
    for (double v : r.coeffs) rn = std::max(rn, std::abs(v));
    for (double v : s.coeffs) sn = std::max(sn, std::abs(v));
    if (sn > 0) worst = std::max(worst, rn / sn);
  }
  return worst;
}

}  // namespace tidalfem

#endif

#ifndef TIDALFEM_DIAGNOSTICS_HPP
#define TIDALFEM_DIAGNOSTICS_HPP

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "tidalfem/dynamics.hpp"

namespace tidalfem {

namespace detail {

inline double quadratic_form(const SparseMatrix& m, const std::vector<double>& x) {
  std::vector<double> y = m * x;
  return la::dot(x, y);
}

}  // namespace detail

// || div u ||_L2^2 integrated cellwise (exact for RT divergences, weight
// kappa optional).
inline double div_l2_norm_sq(const Field& u, const CoefficientField& kappa = nullptr) {
  const FunctionSpace& sp = *u.space;
  const Mesh& mesh = *sp.mesh;
  auto tab = detail::tabulate_rt(sp, detail::assembly_quad_degree(sp));
  double total = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    for (size_t q = 0; q < tab.rule.points.size(); ++q) {
      const auto& qp = tab.rule.points[q];
      GeomEval ge = cell_geometry(mesh, c, qp.x, qp.y);
      double d = 0.0;
      for (int l = 0; l < sp.dofs_per_cell; ++l)
        d += u.coeffs[sp.cell_dof(c, l)] * sp.cell_sign(c, l) * tab.dv[q][l];
      double k = kappa ? kappa(ge.x) : 1.0;
      total += qp.w * k * d * d / ge.g;
    }
  }
  return total;
}

// First-order energy E1 = 1/2 ||u||^2_{1/H} + (beta/2 eps^2) ||eta||^2.
inline double energy_first_order(const State& s, const DiscreteOperators& ops) {
  return 0.5 * detail::quadratic_form(ops.M, s.u.coeffs) +
         0.5 * ops.beta_over_eps2 * detail::quadratic_form(ops.MW, s.eta.coeffs);
}

// Recover u_t from the momentum equation by a velocity mass solve.
inline std::vector<double> recover_u_t(const State& s, const DiscreteOperators& ops,
                                       const ForcingSpec& forcing,
                                       const SolverConfig& cfg = {1e-12, 0, 50}) {
  std::vector<double> rhs = detail::momentum_residual(ops, s, forcing, s.t);
  return solve_spd(ops.M, rhs, cfg);
}

// Second-order energy E = 1/2 ||u_t||^2_{1/H} + (beta/2 eps^2) ||div u||^2.
inline double energy_second_order(const State& s, const DiscreteOperators& ops,
                                  const ForcingSpec& forcing) {
  std::vector<double> ut = recover_u_t(s, ops, forcing);
  return 0.5 * detail::quadratic_form(ops.M, ut) +
         0.5 * ops.beta_over_eps2 * div_l2_norm_sq(s.u);
}

struct EnergyReport {
  double e1 = 0.0;
  double e2 = 0.0;
  double u_norm = 0.0;
  double eta_norm = 0.0;
  double dissipation = 0.0;  // ||u||^2_{C/H}, the instantaneous E1 decay rate
};

inline EnergyReport energy_report(const State& s, const DiscreteOperators& ops,
                                  const ForcingSpec& forcing) {
  EnergyReport r;
  r.e1 = energy_first_order(s, ops);
  r.e2 = energy_second_order(s, ops, forcing);
  r.u_norm = std::sqrt(detail::quadratic_form(ops.M, s.u.coeffs));
  r.eta_norm = std::sqrt(detail::quadratic_form(ops.MW, s.eta.coeffs));
  r.dissipation = detail::quadratic_form(ops.Mc, s.u.coeffs);
  return r;
}

// Splits u into a divergent part uD (normal to every discrete solenoidal
// field in the 1/H inner product) and the solenoidal remainder uS, via the
// saddle system M w - Bt q = 0, B w = B u.
inline std::pair<Field, Field> helmholtz_decompose(const Field& u, const DiscreteOperators& ops,
                                                   const SolverConfig& cfg = {1e-11, 0, 200}) {
  BlockSystem sys;
  sys.A = &ops.M;
  sys.Bt = &ops.Bt;
  sys.B = &ops.B;
  sys.D = nullptr;
  sys.scale_Bt = -1.0;
  sys.scale_B = 1.0;
  sys.nu = ops.V->global_dim;
  sys.np = ops.W->global_dim;
  // Bt annihilates constants whenever boundary fluxes are pinned, so the
  // multiplier needs its mean fixed on every mesh, closed or not.
  sys.project_pressure_mean = true;
  sys.mean_weights = ops.mw_row_sums;
  BlockDiagPreconditioner pre;
  pre.Su = &ops.M;
  pre.Sp = &ops.MWinv;
  pre.sp_scale = 1.0;
  pre.nu = sys.nu;
  pre.np = sys.np;
  pre.inner.rel_tol = std::min(1e-12, cfg.rel_tol);

  std::vector<double> rhs(sys.nu, 0.0);
  std::vector<double> bu = ops.B * u.coeffs;
  rhs.insert(rhs.end(), bu.begin(), bu.end());
  std::vector<double> sol = solve_block(sys, std::move(rhs), pre, cfg);
  Field ud(*ops.V), us(*ops.V);
  for (int i = 0; i < sys.nu; ++i) {
    ud.coeffs[i] = sol[i];
    us.coeffs[i] = u.coeffs[i] - sol[i];
  }
  return {std::move(ud), std::move(us)};
}

// Steady balance: (C/H u, v) + f/(eps H)(u-perp, v) - (beta/eps^2)(eta, div v)
// = (F, v) with div u = 0.  Needs C > 0 somewhere for the velocity block.
inline State solve_steady_geotryptic(const DiscreteOperators& ops, const ForcingSpec& forcing,
                                     double t = 0.0, const SolverConfig& cfg = {1e-11, 0, 200}) {
  SparseMatrix A = sparse_add(1.0, ops.Mc, 1.0, ops.R);
  BlockSystem sys;
  sys.A = &A;
  sys.Bt = &ops.Bt;
  sys.B = &ops.B;
  sys.D = nullptr;
  sys.scale_Bt = -ops.beta_over_eps2;
  sys.scale_B = 1.0;
  sys.nu = ops.V->global_dim;
  sys.np = ops.W->global_dim;
  sys.project_pressure_mean = true;
  sys.mean_weights = ops.mw_row_sums;
  BlockDiagPreconditioner pre;
  pre.Su = &ops.Mc;
  pre.Sp = &ops.MWinv;
  pre.sp_scale = ops.beta_over_eps2;
  pre.nu = sys.nu;
  pre.np = sys.np;
  pre.inner.rel_tol = std::min(1e-12, cfg.rel_tol);

  std::vector<double> rhs = assemble_momentum_rhs(*ops.V, forcing, t);
  rhs.resize(sys.nu + sys.np, 0.0);
  std::vector<double> sol = solve_block(sys, std::move(rhs), pre, cfg);
  State s;
  s.u = Field(*ops.V);
  s.eta = Field(*ops.W);
  s.t = t;
  for (int i = 0; i < sys.nu; ++i) s.u.coeffs[i] = sol[i];
  for (int i = 0; i < sys.np; ++i) s.eta.coeffs[i] = sol[sys.nu + i];
  return s;
}

struct SolutionErrors {
  double err_u = 0.0;    // 1/H-weighted L2 velocity error
  double err_eta = 0.0;  // L2 surface elevation error
  double err_div = 0.0;  // L2 divergence error
  double err_ut = 0.0;   // 1/H-weighted L2 error of recovered u_t
};

// Errors of a discrete state against a manufactured solution at state.t.
// The exact velocity is compared after tangent projection onto each cell.
inline SolutionErrors l2_errors(const State& s, const ManufacturedSolution& ms,
                                const DiscreteOperators& ops, const ModelParams& params) {
  const FunctionSpace& V = *ops.V;
  const FunctionSpace& W = *ops.W;
  const Mesh& mesh = *V.mesh;
  const int dim = mesh.dim;
  ForcingSpec forcing = mms_forcing(ms, params, dim);
  std::vector<double> ut = recover_u_t(s, ops, forcing);
  Field ut_field(V);
  ut_field.coeffs = ut;

  auto tab = detail::tabulate_rt(V, std::min(8, detail::assembly_quad_degree(V) + 2));
  const double t = s.t;
  SolutionErrors err;
  double wdg[3];
  for (int c = 0; c < mesh.num_cells(); ++c) {
    for (size_t q = 0; q < tab.rule.points.size(); ++q) {
      const auto& qp = tab.rule.points[q];
      GeomEval ge = cell_geometry(mesh, c, qp.x, qp.y);
      double invH = 1.0 / params.H(ge.x);
      double ax = 0, ay = 0, ad = 0, utx = 0, uty = 0;
      for (int l = 0; l < V.dofs_per_cell; ++l) {
        double cf = s.u.coeffs[V.cell_dof(c, l)] * V.cell_sign(c, l);
        double cf_t = ut_field.coeffs[V.cell_dof(c, l)] * V.cell_sign(c, l);
        ax += cf * tab.vx[q][l];
        ay += cf * tab.vy[q][l];
        ad += cf * tab.dv[q][l];
        utx += cf_t * tab.vx[q][l];
        uty += cf_t * tab.vy[q][l];
      }
      Vec3 uh = piola_push_forward(ge, ax, ay);
      Vec3 uth = piola_push_forward(ge, utx, uty);
      double divh = piola_push_div(ge, ad);
      // tangent-project the exact fields through the pull-back/push pair
      double px, py;
      piola_pull_back(ge, ms.u(ge.x, t), px, py);
      Vec3 uex = piola_push_forward(ge, px, py);
      piola_pull_back(ge, ms.u_t(ge.x, t), px, py);
      Vec3 utex = piola_push_forward(ge, px, py);

      double w = qp.w * ge.g;
      Vec3 du = uh - uex, dut = uth - utex;
      err.err_u += w * invH * dot(du, du);
      err.err_ut += w * invH * dot(dut, dut);
      double dd = divh - ms.div_u(ge.x, t);
      err.err_div += w * dd * dd;

      W.basis.eval_dg(qp.x, qp.y, wdg);
      double eh = 0;
      for (int l = 0; l < W.dofs_per_cell; ++l) eh += s.eta.coeffs[W.cell_dof(c, l)] * wdg[l];
      double de = eh - ms.eta(ge.x, t);
      err.err_eta += w * de * de;
    }
  }
  err.err_u = std::sqrt(err.err_u);
  err.err_eta = std::sqrt(err.err_eta);
  err.err_div = std::sqrt(err.err_div);
  err.err_ut = std::sqrt(err.err_ut);
  return err;
}

// Deterministic uniform(-1,1) draws, stable across platforms.
struct UniformDraw {
  std::mt19937_64 rng;
  explicit UniformDraw(unsigned long long seed) : rng(seed) {}
  double operator()() {
    return 2.0 * ((rng() >> 11) * (1.0 / 9007199254740992.0)) - 1.0;
  }
};

inline State make_random_state(const FunctionSpace& V, const FunctionSpace& W,
                               const DiscreteOperators& ops, unsigned long long seed) {
  State s;
  s.u = Field(V);
  s.eta = Field(W);
  UniformDraw draw(seed);
  for (auto& c : s.u.coeffs) c = draw();
  for (int d : V.boundary_dofs) s.u.coeffs[d] = 0.0;
  for (auto& c : s.eta.coeffs) c = draw();
  // remove the surface-elevation mean so mass perturbations match
  double wsum = 0, msum = 0;
  for (int i = 0; i < W.global_dim; ++i) {
    wsum += ops.mw_row_sums[i];
    msum += ops.mw_row_sums[i] * s.eta.coeffs[i];
  }
  double mean = msum / wsum;
  for (auto& c : s.eta.coeffs) c -= mean;
  return s;
}

// Largest ratio ||uD||_{1/H} / ||div uD||_{1/H} over the divergent subspace,
// by power iteration on K^-1 M restricted by Helmholtz projection
// (K the 1/H-weighted div-div form).
inline double estimate_poincare_constant(const DiscreteOperators& ops, const ModelParams& params,
                                         int max_outer = 30, double stag_tol = 1e-8) {
  const ModelParams p = params;
  SparseMatrix K = assemble_divdiv(*ops.V, [p](const Vec3& x) { return 1.0 / p.H(x); });
  Field x0(*ops.V);
  UniformDraw draw(12345);
  for (auto& c : x0.coeffs) c = draw();
  for (int d : ops.V->boundary_dofs) x0.coeffs[d] = 0.0;
  Field x = helmholtz_decompose(x0, ops).first;
  // K is only semidefinite (solenoidal nullspace), so iterate with a small
  // mass shift; the projected Rayleigh quotient below is shift-free.
  double k0 = detail::quadratic_form(K, x.coeffs);
  double m0 = detail::quadratic_form(ops.M, x.coeffs);
  if (k0 <= 0.0 || m0 <= 0.0) throw SolverError("degenerate divergent subspace", 0.0, 0);
  SparseMatrix Ks = sparse_add(1.0, K, 0.01 * k0 / m0, ops.M);
  double lambda = 0.0;
  SolverConfig cg{1e-11, 0, 50};
  for (int it = 0; it < max_outer; ++it) {
    std::vector<double> mx = ops.M * x.coeffs;
    std::vector<double> y = solve_spd(Ks, mx, cg, &x.coeffs);
    Field yf(*ops.V);
    yf.coeffs = y;
    Field yd = helmholtz_decompose(yf, ops).first;
    double num = detail::quadratic_form(ops.M, yd.coeffs);
    double den = detail::quadratic_form(K, yd.coeffs);
    if (den <= 0.0) throw SolverError("degenerate divergent subspace", 0.0, it);
    double lambda_new = num / den;
    double scale = std::sqrt(num);
    for (auto& c : yd.coeffs) c /= scale;
    x = std::move(yd);
    if (it > 0 && std::abs(lambda_new - lambda) <= stag_tol * std::abs(lambda_new)) {
      lambda = lambda_new;
      break;
    }
    lambda = lambda_new;
  }
  return std::sqrt(lambda);
}

// Smallest constant with ||div v|| <= (c/h) ||v||, as h_max * sqrt(lambda_max)
// of Bt MW^-1 B x = lambda M_V x (unweighted masses) by power iteration.
inline double estimate_inverse_constant(const FunctionSpace& V, const FunctionSpace& W,
                                        int max_outer = 100, double stag_tol = 1e-8) {
  SparseMatrix mv = assemble_weighted_mass_v(V, [](const Vec3&) { return 1.0; });
  SparseMatrix mw = assemble_mass_w(W);
  SparseMatrix b = assemble_div(V, W);
  SparseMatrix bt = b.transposed();
  CellBlockInverse mwinv = CellBlockInverse::from_block_diagonal(mw, W.dofs_per_cell);
  double h_max = mesh_statistics(*V.mesh).h_max;

  std::vector<double> x(V.global_dim);
  UniformDraw draw(6789);
  for (auto& c : x) c = draw();
  for (int d : V.boundary_dofs) x[d] = 0.0;
  SolverConfig cg{1e-12, 0, 50};
  double lambda = 0.0;
  for (int it = 0; it < max_outer; ++it) {
    std::vector<double> z = b * x;
    std::vector<double> mz(z.size());
    mwinv.apply(z.data(), mz.data());
    std::vector<double> kx = bt * mz;
    double num = la::dot(x, kx);
    double den = detail::quadratic_form(mv, x);
    if (num <= 0.0) return 0.0;  // divergence operator vanished
    double lambda_new = num / den;
    std::vector<double> y = solve_spd(mv, kx, cg, &x);
    double yn = la::norm2(y);
    for (auto& c : y) c /= yn;
    x = std::move(y);
    if (it > 0 && std::abs(lambda_new - lambda) <= stag_tol * std::abs(lambda_new)) {
      lambda = lambda_new;
      break;
    }
    lambda = lambda_new;
  }
  return h_max * std::sqrt(lambda);
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("fit needs >= 2 points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double det = n * sxx - sx * sx;
  if (det == 0.0) throw ValidationError("fit abscissae are degenerate");
  LinearFit fit;
  fit.slope = (n * sxy - sx * sy) / det;
  fit.intercept = (sy * sxx - sx * sxy) / det;
  double ss_tot = 0, ss_res = 0, ybar = sy / n;
  for (size_t i = 0; i < x.size(); ++i) {
    double pred = fit.slope * x[i] + fit.intercept;
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
    ss_res += (y[i] - pred) * (y[i] - pred);
  }
  fit.r2 = ss_tot > 1e-300 ? 1.0 - ss_res / ss_tot : 0.0;
  return fit;
}

// Log-log slope of err against h.  slope ~ k means order-k convergence.
inline LinearFit fit_convergence_rate(const std::vector<double>& h,
                                      const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2)
    throw ValidationError("convergence fit needs >= 2 (h, err) pairs");
  std::vector<double> lh, le;
  for (size_t i = 0; i < h.size(); ++i) {
    if (h[i] <= 0.0 || err[i] <= 0.0)
      throw ValidationError("convergence fit needs positive h and err");
    lh.push_back(std::log(h[i]));
    le.push_back(std::log(err[i]));
  }
  return fit_linear(lh, le);
}

}  // namespace tidalfem

#endif

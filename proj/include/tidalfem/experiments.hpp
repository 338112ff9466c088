#ifndef TIDALFEM_EXPERIMENTS_HPP
#define TIDALFEM_EXPERIMENTS_HPP

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tidalfem/config.hpp"
#include "tidalfem/vtk.hpp"

namespace tidalfem {

namespace detail {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw ResourceError("cannot write " + path);
  for (size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
  out << "\n";
  for (const auto& row : rows) {
    for (size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << fmt17(row[j]);
    out << "\n";
  }
  if (!out) throw ResourceError("short write on " + path);
}

inline long long step_count(const json& cfg) {
  double dt = cfg.at("dt").get<double>();
  double t_end = cfg.at("t_end").get<double>();
  return std::llround(t_end / dt);
}

struct Problem {
  Mesh mesh;
  FunctionSpace V, W;
  ModelParams params;
  DiscreteOperators ops;
};

inline Problem make_problem(const json& cfg) {
  Problem p;
  p.mesh = make_mesh(cfg);
  int order = cfg.at("order").get<int>();
  p.V = build_space(p.mesh, Family::RaviartThomas, order);
  p.W = build_space(p.mesh, Family::Discontinuous, order - 1);
  p.params = make_params(cfg);
  p.ops = build_operators(p.V, p.W, p.params);
  return p;
}

inline json finish_summary(const std::string& out_dir, const std::string& experiment,
                           const json& cfg, const json& metrics,
                           std::chrono::steady_clock::time_point start) {
  json summary = {
      {"experiment", experiment},
      {"config", cfg},
      {"series", "series.csv"},
      {"metrics", metrics},
      {"wall_time_s",
       std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
  };
  std::ofstream out(out_dir + "/summary.json");
  if (!out) throw ResourceError("cannot write " + out_dir + "/summary.json");
  out << summary.dump(2) << "\n";
  return summary;
}

inline void prepare_out_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ResourceError("cannot create output directory " + out_dir);
}

}  // namespace detail

// Free evolution of an initial elevation bump.  The headline number is the
// largest relative excursion of the quadratic invariant over the run.
inline json run_energy(const json& cfg, const std::string& out_dir) {
  auto start = std::chrono::steady_clock::now();
  detail::prepare_out_dir(out_dir);
  detail::Problem p = detail::make_problem(cfg);
  State s0 = make_initial_state(cfg, p.V, p.W, p.ops);
  ForcingSpec forcing = make_forcing(cfg, p.params);
  StepperConfig sc = make_stepper(cfg);
  std::vector<Observer> obs = {
      {"E1", [&](const State& s) { return energy_first_order(s, p.ops); }},
      {"u_norm", [&](const State& s) { return std::sqrt(detail::quadratic_form(p.ops.M, s.u.coeffs)); }},
      {"eta_norm",
       [&](const State& s) { return std::sqrt(detail::quadratic_form(p.ops.MW, s.eta.coeffs)); }},
  };
  Trajectory traj = run(s0, p.ops, forcing, sc, detail::step_count(cfg), obs);
  detail::write_csv(out_dir + "/series.csv", traj.columns, traj.rows);
  double e0 = traj.rows.front()[1];
  double drift = 0.0;
  for (const auto& row : traj.rows) drift = std::max(drift, std::abs(row[1] - e0));
  json metrics = {{"e1_initial", e0},
                  {"e1_final", traj.rows.back()[1]},
                  {"max_rel_energy_drift", e0 > 0.0 ? drift / e0 : drift},
                  {"steps", traj.rows.size() - 1}};
  return detail::finish_summary(out_dir, "energy", cfg, metrics, start);
}

// Same setup with linear drag switched on.  Checks strict decay of the
// first-order energy and fits an exponential rate on the late-time window.
inline json run_damping(const json& cfg, const std::string& out_dir) {
  auto start = std::chrono::steady_clock::now();
  detail::prepare_out_dir(out_dir);
  detail::Problem p = detail::make_problem(cfg);
  State s0 = make_initial_state(cfg, p.V, p.W, p.ops);
  ForcingSpec forcing = make_forcing(cfg, p.params);
  StepperConfig sc = make_stepper(cfg);
  std::vector<Observer> obs = {
      {"E1", [&](const State& s) { return energy_first_order(s, p.ops); }},
      {"E2", [&](const State& s) { return energy_second_order(s, p.ops, forcing); }},
  };
  Trajectory traj = run(s0, p.ops, forcing, sc, detail::step_count(cfg), obs);
  detail::write_csv(out_dir + "/series.csv", traj.columns, traj.rows);

  double e0 = traj.rows.front()[1];
  int violations = 0;
  double prev = e0;
  for (size_t i = 1; i < traj.rows.size(); ++i) {
    if (traj.rows[i][1] > prev + 1e-12 * e0) ++violations;
    prev = traj.rows[i][1];
  }
  double t_end = cfg.at("t_end").get<double>();
  double window_start = 0.2 * t_end;
  std::vector<double> ts, loge;
  for (const auto& row : traj.rows)
    if (row[0] >= window_start && row[1] > 0.0) {
      ts.push_back(row[0]);
      loge.push_back(std::log(row[1]));
    }
  LinearFit fit = fit_linear(ts, loge);
  json metrics = {{"e1_initial", e0},
                  {"e1_final", traj.rows.back()[1]},
                  {"monotone_violations", violations},
                  {"fit_window_start", window_start},
                  {"decay_rate", -fit.slope},
                  {"fit_r2", fit.r2}};
  return detail::finish_summary(out_dir, "damping", cfg, metrics, start);
}

// Forced problem with a known closed-form solution; measures discretization
// error against it across a hierarchy of sphere meshes.
inline json run_mms(const json& cfg, const std::string& out_dir) {
  auto start = std::chrono::steady_clock::now();
  detail::prepare_out_dir(out_dir);
  const json& mms_cfg = cfg.at("mms");
  std::vector<int> levels = mms_cfg.at("levels").get<std::vector<int>>();
  bool dt_check = mms_cfg.value("dt_check", false);
  double omega = mms_cfg.value("omega", 2.0);
  int order = cfg.at("order").get<int>();
  int gdeg = cfg.at("geometry_degree").get<int>();
  ModelParams params = make_params(cfg);
  ManufacturedSolution ms = make_sphere_mms(omega);
  StepperConfig sc = make_stepper(cfg);
  double t_end = cfg.at("t_end").get<double>();

  struct LevelErrors {
    double err_u = 0, err_eta = 0, err_div = 0, err_ut = 0;
  };
  auto run_level = [&](const Mesh& mesh, const DiscreteOperators& ops, const FunctionSpace& V,
                       const FunctionSpace& W, double dt,
                       std::vector<std::vector<double>>* series) {
    ForcingSpec forcing = mms_forcing(ms, params);
    State s;
    s.u = interpolate_hdiv(V, [&](const Vec3& x) { return ms.u(x, 0.0); });
    s.eta = project_l2(W, [&](const Vec3& x) { return ms.eta(x, 0.0); });
    long long n = std::llround(t_end / dt);
    MidpointStepper stepper(ops, dt, sc.solver);
    LevelErrors acc;
    for (long long k = 0; k < n; ++k) {
      stepper.advance(s, forcing);
      SolutionErrors e = l2_errors(s, ms, ops, params);
      acc.err_u += e.err_u;
      acc.err_eta += e.err_eta;
      acc.err_div += e.err_div;
      acc.err_ut += e.err_ut;
      if (series) series->push_back({s.t, e.err_u, e.err_eta, e.err_div, e.err_ut});
    }
    if (n > 0) {
      acc.err_u /= n;
      acc.err_eta /= n;
      acc.err_div /= n;
      acc.err_ut /= n;
    }
    return acc;
  };

  std::vector<std::string> columns = {"level", "h", "err_u", "err_eta", "err_div", "err_ut"};
  if (dt_check) columns.insert(columns.end(), {"err_u_dt_half", "err_eta_dt_half"});
  std::vector<std::vector<double>> table;
  std::vector<double> hs, eu, eeta, ediv, eut;
  double max_dt_change = 0.0;
  for (int level : levels) {
    Mesh mesh = build_icosphere(level, gdeg);
    FunctionSpace V = build_space(mesh, Family::RaviartThomas, order);
    FunctionSpace W = build_space(mesh, Family::Discontinuous, order - 1);
    DiscreteOperators ops = build_operators(V, W, params);
    double h = mesh_statistics(mesh).h_max;
    std::vector<std::vector<double>> level_series;
    LevelErrors e = run_level(mesh, ops, V, W, sc.dt, &level_series);
    detail::write_csv(out_dir + "/errors_level" + std::to_string(level) + ".csv",
                      {"t", "err_u", "err_eta", "err_div", "err_ut"}, level_series);
    std::vector<double> row = {double(level), h, e.err_u, e.err_eta, e.err_div, e.err_ut};
    if (dt_check) {
      LevelErrors e2 = run_level(mesh, ops, V, W, sc.dt / 2.0, nullptr);
      row.insert(row.end(), {e2.err_u, e2.err_eta});
      if (e.err_eta > 0.0)
        max_dt_change = std::max(max_dt_change, std::abs(e2.err_eta - e.err_eta) / e.err_eta);
      if (e.err_u > 0.0)
        max_dt_change = std::max(max_dt_change, std::abs(e2.err_u - e.err_u) / e.err_u);
    }
    table.push_back(row);
    hs.push_back(h);
    eu.push_back(e.err_u);
    eeta.push_back(e.err_eta);
    ediv.push_back(e.err_div);
    eut.push_back(e.err_ut);
  }
  detail::write_csv(out_dir + "/series.csv", columns, table);
  auto fit_json = [](const LinearFit& f) { return json{{"slope", f.slope}, {"r2", f.r2}}; };
  json metrics;
  if (hs.size() >= 2) {
    metrics = {{"fit_u", fit_json(fit_convergence_rate(hs, eu))},
               {"fit_eta", fit_json(fit_convergence_rate(hs, eeta))},
               {"fit_div", fit_json(fit_convergence_rate(hs, ediv))},
               {"fit_ut", fit_json(fit_convergence_rate(hs, eut))}};
  } else {
    metrics = {{"levels_run", hs.size()}};
  }
  if (dt_check) metrics["max_rel_dt_change"] = max_dt_change;
  return detail::finish_summary(out_dir, "mms", cfg, metrics, start);
}

// Tidally forced runs from two different random starts; the gap between the
// trajectories must collapse while the late-time solution locks onto the
// forcing period.
inline json run_spinup(const json& cfg, const std::string& out_dir) {
  auto start = std::chrono::steady_clock::now();
  detail::prepare_out_dir(out_dir);
  detail::Problem p = detail::make_problem(cfg);
  ForcingSpec forcing = make_forcing(cfg, p.params);
  StepperConfig sc = make_stepper(cfg);
  State a = make_random_state(p.V, p.W, p.ops, cfg.at("seed").get<long long>());
  State b = make_random_state(p.V, p.W, p.ops, cfg.at("seed2").get<long long>());

  auto state_gap = [&](const State& x, const State& y) {
    std::vector<double> du(x.u.coeffs.size()), de(x.eta.coeffs.size());
    for (size_t i = 0; i < du.size(); ++i) du[i] = x.u.coeffs[i] - y.u.coeffs[i];
    for (size_t i = 0; i < de.size(); ++i) de[i] = x.eta.coeffs[i] - y.eta.coeffs[i];
    return std::sqrt(detail::quadratic_form(p.ops.M, du)) +
           std::sqrt(detail::quadratic_form(p.ops.MW, de));
  };

  MidpointStepper midpoint_a(p.ops, sc.dt, sc.solver), midpoint_b(p.ops, sc.dt, sc.solver);
  SymplecticStepper symplectic_a(p.ops, sc.dt, sc.solver), symplectic_b(p.ops, sc.dt, sc.solver);
  bool midpoint = sc.scheme == Scheme::ImplicitMidpoint;
  long long n = detail::step_count(cfg);
  std::vector<std::vector<double>> rows;
  rows.push_back({0.0, state_gap(a, b), energy_first_order(a, p.ops)});
  for (long long k = 0; k < n; ++k) {
    if (midpoint) {
      midpoint_a.advance(a, forcing);
      midpoint_b.advance(b, forcing);
    } else {
      symplectic_a.advance(a, forcing);
      symplectic_b.advance(b, forcing);
    }
    rows.push_back({a.t, state_gap(a, b), energy_first_order(a, p.ops)});
  }
  detail::write_csv(out_dir + "/series.csv", {"t", "gap", "E1"}, rows);

  double gap0 = rows.front()[1], gapT = rows.back()[1];
  double t_end = cfg.at("t_end").get<double>();
  std::vector<double> ts, logg;
  for (const auto& row : rows)
    if (row[0] >= 0.5 * t_end && row[1] > 0.0) {
      ts.push_back(row[0]);
      logg.push_back(std::log(row[1]));
    }
  LinearFit fit = ts.size() >= 2 ? fit_linear(ts, logg) : LinearFit{0.0, 0.0, 0.0};
  json metrics = {{"gap_initial", gap0},
                  {"gap_final", gapT},
                  {"gap_ratio", gap0 > 0.0 ? gapT / gap0 : 0.0},
                  {"tail_decay_rate", -fit.slope},
                  {"tail_fit_r2", fit.r2},
                  {"e1_final", rows.back()[2]}};
  return detail::finish_summary(out_dir, "spinup", cfg, metrics, start);
}

// General-purpose driver: any mesh, scheme, forcing and initial condition
// from the config, with optional VTK frames for visualization.
inline json run_simulate(const json& cfg, const std::string& out_dir) {
  auto start = std::chrono::steady_clock::now();
  detail::prepare_out_dir(out_dir);
  detail::Problem p = detail::make_problem(cfg);
  State s = make_initial_state(cfg, p.V, p.W, p.ops);
  ForcingSpec forcing = make_forcing(cfg, p.params);
  StepperConfig sc = make_stepper(cfg);
  long long vtk_every = cfg.at("output").value("vtk_every", 0);

  MidpointStepper midpoint(p.ops, sc.dt, sc.solver);
  SymplecticStepper symplectic(p.ops, sc.dt, sc.solver);
  bool use_midpoint = sc.scheme == Scheme::ImplicitMidpoint;
  long long n = detail::step_count(cfg);
  int frame = 0;
  auto maybe_frame = [&](long long k) {
    if (vtk_every <= 0 || k % vtk_every != 0) return;
    char name[64];
    std::snprintf(name, sizeof(name), "/frame_%04d.vtk", frame++);
    write_vtk(out_dir + name, p.mesh, &s.u, &s.eta);
  };
  auto record = [&](std::vector<std::vector<double>>& rows) {
    rows.push_back({s.t, energy_first_order(s, p.ops),
                    std::sqrt(detail::quadratic_form(p.ops.M, s.u.coeffs)),
                    std::sqrt(detail::quadratic_form(p.ops.MW, s.eta.coeffs)),
                    std::sqrt(div_l2_norm_sq(s.u))});
  };
  std::vector<std::vector<double>> rows;
  record(rows);
  maybe_frame(0);
  for (long long k = 1; k <= n; ++k) {
    if (use_midpoint)
      midpoint.advance(s, forcing);
    else
      symplectic.advance(s, forcing);
    record(rows);
    maybe_frame(k);
  }
  detail::write_csv(out_dir + "/series.csv", {"t", "E1", "u_norm", "eta_norm", "div_norm"}, rows);
  json metrics = {{"e1_final", rows.back()[1]},
                  {"u_norm_final", rows.back()[2]},
                  {"eta_norm_final", rows.back()[3]},
                  {"frames", frame}};
  return detail::finish_summary(out_dir, "simulate", cfg, metrics, start);
}

inline json run_experiment(const json& cfg, const std::string& out_dir) {
  std::string exp = cfg.at("experiment").get<std::string>();
  if (exp == "energy") return run_energy(cfg, out_dir);
  if (exp == "damping") return run_damping(cfg, out_dir);
  if (exp == "mms") return run_mms(cfg, out_dir);
  if (exp == "spinup") return run_spinup(cfg, out_dir);
  if (exp == "simulate") return run_simulate(cfg, out_dir);
  throw ConfigError("unknown experiment '" + exp + "'");
}

}  // namespace tidalfem

#endif

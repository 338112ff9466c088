#ifndef TIDALFEM_CONFIG_HPP
#define TIDALFEM_CONFIG_HPP

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "tidalfem/diagnostics.hpp"

namespace tidalfem {

using json = nlohmann::json;

// Built-in defaults per experiment.  Every run starts from these, overlays
// the config file, then the command-line overrides; the resolved document is
// echoed into the run summary.
inline json default_config(const std::string& experiment) {
  json cfg = {
      {"experiment", experiment},
      {"mesh", {{"type", "icosphere"}, {"level", 2}}},
      {"order", 1},
      {"geometry_degree", 1},
      {"params",
       {{"epsilon", 0.1},
        {"beta", 0.1},
        {"f", {{"type", "const"}, {"value", 1.0}}},
        {"C", {{"type", "const"}, {"value", 0.0}}},
        {"H", {{"type", "const"}, {"value", 1.0}}},
        {"H_star", 1e-8}}},
      {"dt", 0.01},
      {"t_end", 1.0},
      {"scheme", "midpoint"},
      {"solver", {{"rel_tol", 1e-11}, {"max_iters", 0}, {"restart", 50}}},
      {"ic", {{"type", "zero"}}},
      {"forcing", {{"type", "zero"}}},
      {"seed", 1},
      {"seed2", 2},
      {"output", {{"vtk_every", 0}}},
  };
  if (experiment == "energy") {
    cfg["params"]["H"] = {{"type", "gauss_x"}, {"base", 1.0}, {"amp", 0.1}};
    cfg["ic"] = {{"type", "eta_xyz"}};
    cfg["solver"]["rel_tol"] = 1e-13;
  } else if (experiment == "damping") {
    cfg["params"]["H"] = {{"type", "gauss_x"}, {"base", 1.0}, {"amp", 0.1}};
    cfg["params"]["C"] = {{"type", "const"}, {"value", 0.01}};
    cfg["ic"] = {{"type", "eta_xyz"}};
    cfg["dt"] = 0.05;
    cfg["t_end"] = 50.0;
    cfg["solver"]["rel_tol"] = 1e-12;
  } else if (experiment == "mms") {
    cfg["params"]["C"] = {{"type", "const"}, {"value", 1000.0}};
    cfg["dt"] = 1e-3;
    cfg["t_end"] = 0.3;
    cfg["mms"] = {{"levels", {1, 2, 3, 4}}, {"dt_check", false}, {"omega", 2.0}};
    cfg["solver"]["rel_tol"] = 1e-10;
  } else if (experiment == "spinup") {
    cfg["params"]["C"] = {{"type", "const"}, {"value", 10.0}};
    cfg["forcing"] = {{"type", "tidal_potential"},
                      {"potential", "xyz"},
                      {"time", "sin"},
                      {"gain", 1.0},
                      {"scale_by_buoyancy", true}};
    cfg["t_end"] = 10.0;
    cfg["seed2"] = 3;
    cfg["solver"]["rel_tol"] = 1e-12;
  } else if (experiment == "simulate") {
    cfg["mesh"]["level"] = 1;
  } else {
    throw ConfigError("unknown experiment '" + experiment + "'");
  }
  return cfg;
}

namespace detail {

inline void require_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

inline double positive_number(const json& v, const std::string& what) {
  if (!v.is_number()) throw ConfigError(what + " must be a number");
  double d = v.get<double>();
  if (d <= 0.0) throw ConfigError(what + " must be positive");
  return d;
}

}  // namespace detail

inline void validate_config(const json& cfg) {
  detail::require_keys(cfg, "config",
                       {"experiment", "mesh", "order", "geometry_degree", "params", "dt", "t_end",
                        "scheme", "solver", "ic", "forcing", "seed", "seed2", "mms", "output"});
  std::string exp = cfg.at("experiment").get<std::string>();
  if (exp != "energy" && exp != "damping" && exp != "mms" && exp != "spinup" && exp != "simulate")
    throw ConfigError("unknown experiment '" + exp + "'");
  const json& mesh = cfg.at("mesh");
  detail::require_keys(mesh, "mesh", {"type", "level", "nx", "ny"});
  std::string mtype = mesh.at("type").get<std::string>();
  if (mtype == "icosphere") {
    int level = mesh.at("level").get<int>();
    if (level < 0 || level > 7) throw ConfigError("mesh.level must be in [0, 7]");
  } else if (mtype == "rect") {
    if (mesh.value("nx", 0) < 1 || mesh.value("ny", 0) < 1)
      throw ConfigError("rect mesh needs nx, ny >= 1");
  } else {
    throw ConfigError("mesh.type must be 'icosphere' or 'rect'");
  }
  int order = cfg.at("order").get<int>();
  if (order != 1 && order != 2) throw ConfigError("order must be 1 or 2");
  int gdeg = cfg.at("geometry_degree").get<int>();
  if (gdeg != 1 && gdeg != 2) throw ConfigError("geometry_degree must be 1 or 2");
  const json& params = cfg.at("params");
  detail::require_keys(params, "params", {"epsilon", "beta", "f", "C", "H", "H_star"});
  detail::positive_number(params.at("epsilon"), "params.epsilon");
  detail::positive_number(params.at("beta"), "params.beta");
  for (const char* key : {"f", "C", "H"}) {
    const json& spec = params.at(key);
    detail::require_keys(spec, std::string("params.") + key, {"type", "value", "base", "amp"});
    std::string type = spec.at("type").get<std::string>();
    if (type != "const" && type != "sin_lat" && type != "gauss_x")
      throw ConfigError(std::string("params.") + key + ".type must be const, sin_lat or gauss_x");
  }
  if (!cfg.at("dt").is_number() || cfg.at("dt").get<double>() <= 0.0)
    throw ConfigError("dt must be positive");
  if (!cfg.at("t_end").is_number() || cfg.at("t_end").get<double>() < 0.0)
    throw ConfigError("t_end must be nonnegative");
  std::string scheme = cfg.at("scheme").get<std::string>();
  if (scheme != "midpoint" && scheme != "symplectic")
    throw ConfigError("scheme must be 'midpoint' or 'symplectic'");
  const json& solver = cfg.at("solver");
  detail::require_keys(solver, "solver", {"rel_tol", "max_iters", "restart"});
  detail::positive_number(solver.at("rel_tol"), "solver.rel_tol");
  const json& ic = cfg.at("ic");
  detail::require_keys(ic, "ic", {"type", "seed"});
  std::string ictype = ic.at("type").get<std::string>();
  if (ictype != "zero" && ictype != "eta_xyz" && ictype != "random")
    throw ConfigError("ic.type must be zero, eta_xyz or random");
  const json& forcing = cfg.at("forcing");
  detail::require_keys(forcing, "forcing",
                       {"type", "potential", "time", "gain", "scale_by_buoyancy"});
  std::string ftype = forcing.at("type").get<std::string>();
  if (ftype != "zero" && ftype != "tidal_potential")
    throw ConfigError("forcing.type must be zero or tidal_potential");
  if (cfg.contains("mms")) {
    const json& mms = cfg.at("mms");
    detail::require_keys(mms, "mms", {"levels", "dt_check", "omega"});
    if (!mms.at("levels").is_array() || mms.at("levels").empty())
      throw ConfigError("mms.levels must be a nonempty array");
  }
  const json& output = cfg.at("output");
  detail::require_keys(output, "output", {"vtk_every"});
  if (order == 2 && mtype == "icosphere" && gdeg != 2)
    throw ConfigError("order 2 on the sphere requires geometry_degree 2");
}

// Overlay: file config and overrides replace defaults key by key (deep).
inline void merge_into(json& base, const json& patch, const std::string& where = "config") {
  if (!patch.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
      merge_into(base[it.key()], it.value(), where + "." + it.key());
    else
      base[it.key()] = it.value();
  }
}

// "a.b.c=value" with the value parsed as JSON when possible.
inline void apply_override(json& cfg, const std::string& kv) {
  auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value");
  std::string path = kv.substr(0, eq), value = kv.substr(eq + 1);
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;  // plain string
  }
  json* node = &cfg;
  size_t start = 0;
  while (true) {
    size_t dotpos = path.find('.', start);
    std::string key = path.substr(start, dotpos == std::string::npos ? dotpos : dotpos - start);
    if (key.empty()) throw ConfigError("bad override path '" + path + "'");
    if (dotpos == std::string::npos) {
      (*node)[key] = parsed;
      break;
    }
    node = &(*node)[key];
    start = dotpos + 1;
  }
}

inline json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
}

// defaults <- file <- overrides, then validated.
inline json resolve_config(const std::string& experiment, const json& file_cfg,
                           const std::vector<std::string>& overrides) {
  json cfg = default_config(experiment);
  if (!file_cfg.is_null()) merge_into(cfg, file_cfg);
  for (const auto& kv : overrides) apply_override(cfg, kv);
  if (cfg.at("experiment").get<std::string>() != experiment)
    throw ConfigError("config experiment does not match the subcommand");
  validate_config(cfg);
  return cfg;
}

inline CoefficientField make_coefficient(const json& spec, const std::string& what) {
  std::string type = spec.at("type").get<std::string>();
  if (type == "const") {
    double v = spec.at("value").get<double>();
    return [v](const Vec3&) { return v; };
  }
  if (type == "sin_lat") return [](const Vec3& x) { return x.z; };
  if (type == "gauss_x") {
    double base = spec.at("base").get<double>();
    double amp = spec.at("amp").get<double>();
    return [base, amp](const Vec3& x) { return base + amp * std::exp(-x.x * x.x); };
  }
  throw ConfigError(what + ": unknown coefficient type " + type);
}

inline Mesh make_mesh(const json& cfg) {
  const json& mesh = cfg.at("mesh");
  if (mesh.at("type") == "rect") return build_rect_mesh(mesh.at("nx"), mesh.at("ny"));
  return build_icosphere(mesh.at("level"), cfg.at("geometry_degree"));
}

inline ModelParams make_params(const json& cfg) {
  const json& p = cfg.at("params");
  ModelParams mp;
  mp.epsilon = p.at("epsilon").get<double>();
  mp.beta = p.at("beta").get<double>();
  mp.f = make_coefficient(p.at("f"), "params.f");
  mp.C = make_coefficient(p.at("C"), "params.C");
  mp.H = make_coefficient(p.at("H"), "params.H");
  mp.H_star = p.at("H_star").get<double>();
  return mp;
}

inline StepperConfig make_stepper(const json& cfg) {
  StepperConfig sc;
  sc.scheme =
      cfg.at("scheme") == "midpoint" ? Scheme::ImplicitMidpoint : Scheme::SymplecticEuler;
  sc.dt = cfg.at("dt").get<double>();
  const json& s = cfg.at("solver");
  sc.solver.rel_tol = s.at("rel_tol").get<double>();
  sc.solver.max_iters = s.at("max_iters").get<int>();
  sc.solver.restart = s.at("restart").get<int>();
  return sc;
}

inline ForcingSpec make_forcing(const json& cfg, const ModelParams& params) {
  const json& f = cfg.at("forcing");
  if (f.at("type") == "zero") return ForcingSpec::zero();
  std::string potential = f.value("potential", "xyz");
  std::string time = f.value("time", "sin");
  double gain = f.value("gain", 1.0);
  if (f.value("scale_by_buoyancy", true)) gain *= params.beta_over_eps2();
  if (potential != "xyz" && potential != "const")
    throw ConfigError("forcing.potential must be 'xyz' or 'const'");
  if (time != "sin" && time != "const") throw ConfigError("forcing.time must be 'sin' or 'const'");
  bool is_xyz = potential == "xyz";
  bool is_sin = time == "sin";
  return ForcingSpec::divergence_form(
      [is_xyz, is_sin](const Vec3& x, double t) {
        double space = is_xyz ? x.x * x.y * x.z : 1.0;
        return (is_sin ? std::sin(t) : 1.0) * space;
      },
      gain);
}

inline State make_initial_state(const json& cfg, const FunctionSpace& V, const FunctionSpace& W,
                                const DiscreteOperators& ops) {
  const json& ic = cfg.at("ic");
  std::string type = ic.at("type").get<std::string>();
  if (type == "random")
    return make_random_state(V, W, ops, ic.value("seed", cfg.at("seed").get<long long>()));
  State s;
  s.u = Field(V);
  s.eta = Field(W);
  if (type == "eta_xyz")
    s.eta = project_l2(W, [](const Vec3& x) { return x.x * x.y * x.z; });
  return s;
}

}  // namespace tidalfem

#endif

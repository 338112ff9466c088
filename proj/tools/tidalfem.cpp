#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "tidalfem/experiments.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("-c,--config", args.config_path, "JSON config file (overlays the defaults)");
  sub->add_option("-o,--out", args.out_dir, "output directory (default out/<experiment>)");
  sub->add_option("-D,--override", args.overrides,
                  "config override as key.path=value; repeatable");
}

int run(const std::string& experiment, const CommonArgs& args) {
  using tidalfem::json;
  json file_cfg;
  if (!args.config_path.empty()) file_cfg = tidalfem::load_config_file(args.config_path);
  json cfg = tidalfem::resolve_config(experiment, file_cfg, args.overrides);
  const char* log = std::getenv("TIDALFEM_LOG");
  bool verbose = log && std::string(log) == "debug";
  if (verbose) std::cerr << "resolved config:\n" << cfg.dump(2) << "\n";
  std::string out_dir = args.out_dir.empty() ? "out/" + experiment : args.out_dir;
  json summary = tidalfem::run_experiment(cfg, out_dir);
  std::cout << summary.at("metrics").dump(2) << "\n";
  if (verbose) std::cerr << "wrote " << out_dir << "/summary.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed finite element solver for rotating shallow-water tides"};
  app.require_subcommand(1);

  std::map<std::string, CommonArgs> args;
  const std::pair<const char*, const char*> experiments[] = {
      {"energy", "free evolution, tracks the quadratic invariant"},
      {"damping", "drag-damped evolution with an exponential decay fit"},
      {"mms", "convergence study against a manufactured solution"},
      {"spinup", "forced runs from two random starts, trajectory gap decay"},
      {"simulate", "general run driven entirely by the config"},
  };
  for (const auto& [name, desc] : experiments) add_common(app.add_subcommand(name, desc), args[name]);

  CLI11_PARSE(app, argc, argv);

  std::string chosen = app.get_subcommands().front()->get_name();
  try {
    return run(chosen, args[chosen]);
  } catch (const tidalfem::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const tidalfem::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const tidalfem::GeometryError& e) {
    std::cerr << "geometry error: " << e.what() << "\n";
    return 2;
  } catch (const tidalfem::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const tidalfem::ResourceError& e) {
    std::cerr << "resource error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// hjbk: synthesize, simulate and verify kernel value functions from JSON experiment configs.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hjbk/errors.hpp"
#include "hjbk/pipeline.hpp"

namespace {

using namespace hjbk;
namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string positional;
  std::string vf;
  std::string out;
  std::optional<unsigned> seed;
  std::optional<double> solver_tol;
  bool quiet = false;
  bool dump_conic = false;
};

ExperimentConfig resolve_config(const Options& o, bool allow_builtin) {
  std::string src = !o.config.empty() ? o.config : o.positional;
  if (src.empty()) throw InputError("no config given (use --config PATH)");
  ExperimentConfig c;
  if (allow_builtin && !fs::exists(src) && src.find('/') == std::string::npos && src.find(".json") == std::string::npos) {
    const auto names = builtin_experiment_names();
    if (std::find(names.begin(), names.end(), src) == names.end()) {
      throw InputError("config not found: " + src + " (not a file or builtin experiment)");
    }
    c = builtin_experiment(src);
  } else {
    c = load_config(src);
  }
  if (o.seed) c.seed = *o.seed;
  if (o.solver_tol) {
    if (!(*o.solver_tol > 0.0)) throw InputError("--solver-tol must be > 0");
    c.solver_tolerance = *o.solver_tol;
  }
  return c;
}

std::string output_dir(const Options& o, const ExperimentConfig& c) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("HJBK_OUT_DIR"); env && *env) return (fs::path(env) / c.name).string();
  return c.output_dir;
}

nlohmann::json read_json(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw InputError(std::string(what) + " not found: " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string(what) + " " + path + " is not valid JSON: " + e.what());
  }
}

nlohmann::json equilibrium_json(const EquilibriumResiduals& e) {
  return {{"value_residual", e.value}, {"gradient_residual", e.gradient}, {"hessian_residual", e.hessian}};
}

int cmd_synthesize(const Options& o) {
  const ExperimentConfig c = resolve_config(o, true);
  const std::string dir = output_dir(o, c);
  const PreparedModel prep = prepare_model(c);
  const CenterSet centers = build_centers(c);
  SynthesisOptions opts;
  opts.hessian_relaxation = c.hessian_relaxation;
  opts.precondition_blocks = c.precondition_blocks;
  const SynthesisProblem prob = assemble(prep.model, c.kernel, centers, build_collocation(c, centers), prep.are.P, opts);
  if (o.dump_conic) write_file_atomic((fs::path(dir) / "conic.json").string(), conic_to_json(to_conic(prob)).dump() + "\n");
  for (const auto& w : prob.warnings) std::cerr << "warning: " << w << "\n";
  const SynthesisOutcome out = synthesize(prob, solver_settings(c));
  write_file_atomic((fs::path(dir) / "vf.json").string(), out.vf.to_json().dump(2) + "\n");
  nlohmann::json eq = {{"equilibrium", equilibrium_json(out.equilibrium)},
                       {"min_collocation_eigenvalue", out.min_collocation_eigenvalue},
                       {"solver",
                        {{"status", to_string(out.stats.status)},
                         {"iterations", out.stats.iterations},
                         {"objective", out.stats.objective},
                         {"duality_gap", out.stats.duality_gap},
                         {"wall_time_s", out.stats.wall_time_s},
                         {"warnings", out.stats.warnings}}}};
  write_file_atomic((fs::path(dir) / "equilibrium.json").string(), eq.dump(2) + "\n");
  if (!o.quiet) {
    std::cout << "wrote " << (fs::path(dir) / "vf.json").string() << " (M = " << prob.num_coefficients() << ")\n"
              << eq.dump(2) << "\n";
  }
  return 0;
}

int cmd_simulate(const Options& o) {
  const ExperimentConfig c = resolve_config(o, true);
  if (o.vf.empty()) throw InputError("simulate needs --vf PATH");
  const SystemModel model = build_model(c);
  const ValueFunction vf = ValueFunction::from_json(read_json(o.vf, "value function"), model);
  const std::string dir = output_dir(o, c);
  const SimulationResult batch = run_simulation(c, model, vf);
  write_file_atomic((fs::path(dir) / "trajectories.csv").string(), trajectories_csv(batch));
  const nlohmann::json summary = batch_summary(batch);
  write_file_atomic((fs::path(dir) / "batch_summary.json").string(), summary.dump(2) + "\n");
  if (!o.quiet) std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_verify(const Options& o) {
  const ExperimentConfig c = resolve_config(o, true);
  if (o.vf.empty()) throw InputError("verify needs --vf PATH");
  const SystemModel model = build_model(c);
  const ValueFunction vf = ValueFunction::from_json(read_json(o.vf, "value function"), model);
  const CenterSet centers = build_centers(c);
  const CollocationGrid grid = build_collocation(c, centers);
  std::optional<SimulationResult> batch;
  std::string sim_error;
  try {
    batch = run_simulation(c, model, vf);
  } catch (const SimulationError& e) {
    sim_error = e.what();
  }
  const VerificationReport report = build_report(c, model, vf, grid, batch ? &*batch : nullptr);
  nlohmann::json j = report.to_json();
  const AssumptionReport a = check_assumptions(model, c.seed);
  j["assumptions"] = {{"equilibrium_residual", a.equilibrium_residual},
                      {"cost_at_origin", a.cost_at_origin},
                      {"min_sampled_cost", a.min_sampled_cost},
                      {"cost_positive_on_samples", a.cost_positive_on_samples},
                      {"seed", c.seed}};
  if (!sim_error.empty()) j["simulation_error"] = sim_error;
  const std::string dir = output_dir(o, c);
  write_file_atomic((fs::path(dir) / "report.json").string(), j.dump(2) + "\n");
  std::string text = report.to_text();
  if (!sim_error.empty()) text += "  simulation failed: " + sim_error + "\n";
  write_file_atomic((fs::path(dir) / "report.txt").string(), text);
  if (!o.quiet) std::cout << text;
  return 0;
}

int cmd_reproduce(const Options& o) {
  const ExperimentConfig c = resolve_config(o, true);
  const std::string dir = output_dir(o, c);
  const ReproduceOutcome r = reproduce(c, dir);
  if (!o.quiet) {
    std::cout << "experiment " << c.name << " -> " << dir << "\n" << gate_table(r.gates);
    std::cout << (r.passed ? "all gates passed\n" : "gate failure\n");
  } else if (!r.passed) {
    std::cerr << gate_table(r.gates);
  }
  return r.passed ? 0 : 1;
}

int cmd_convergence(const Options& o) {
  const ExperimentConfig c = resolve_config(o, true);
  const PreparedModel prep = prepare_model(c);
  if (!prep.model.exact) throw InputError("convergence-study needs a system with a known exact solution");
  if (c.convergence.M.empty()) throw InputError("config.convergence.M is empty");
  SolverSettings s = solver_settings(c);
  s.tolerance = o.solver_tol ? *o.solver_tol : c.convergence.solver_tolerance;
  SynthesisOptions opts;
  opts.hessian_relaxation = c.hessian_relaxation;
  opts.precondition_blocks = c.precondition_blocks;
  const ConvergenceStudy study =
      convergence_study(prep.model, c.kernel, c.convergence.M, prep.are.P,
                        dense_grid(prep.model.domain, c.convergence.quadrature_per_axis), s, opts, c.convergence.noise);
  nlohmann::json j = convergence_json(study);
  j["experiment"] = c.name;
  const std::string dir = output_dir(o, c);
  write_file_atomic((fs::path(dir) / "convergence.json").string(), j.dump(2) + "\n");
  if (!o.quiet) std::cout << j.dump(2) << "\n";
  return 0;
}

void error_json(const char* kind, const std::exception& e) {
  nlohmann::json j = {{"error", kind}, {"message", e.what()}};
  if (const auto* inf = dynamic_cast<const InfeasibleError*>(&e)) {
    j["phase1_optimum"] = inf->phase1_optimum();
    nlohmann::json v = nlohmann::json::array();
    for (const auto& viol : inf->violations()) v.push_back({{"block", viol.block}, {"min_eigenvalue", viol.min_eigenvalue}});
    j["violated_blocks"] = v;
  }
  std::cerr << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel-collocation HJB value function synthesis"};
  app.require_subcommand(1);
  Options o;
  std::string seed_str, tol_str;

  auto add_common = [&](CLI::App* sub, bool needs_vf) {
    sub->add_option("config_path", o.positional, "Config file (or builtin experiment name)");
    sub->add_option("--config", o.config, "Experiment config JSON");
    if (needs_vf) sub->add_option("--vf", o.vf, "Value function JSON written by synthesize");
    sub->add_option("--out", o.out, "Output directory (default: $HJBK_OUT_DIR/<name> or config output_dir)");
    sub->add_option("--seed", seed_str, "Seed for sampled checks");
    sub->add_option("--solver-tol", tol_str, "Override the solver tolerance");
    sub->add_flag("--quiet", o.quiet, "Only report errors");
  };
  auto* syn = app.add_subcommand("synthesize", "Assemble and solve the collocation SDP, write vf.json");
  add_common(syn, false);
  syn->add_flag("--dump-conic", o.dump_conic, "Also write the conic program as conic.json");
  auto* sim = app.add_subcommand("simulate", "Closed-loop batch simulation of a value function");
  add_common(sim, true);
  auto* ver = app.add_subcommand("verify", "Verification report for a value function");
  add_common(ver, true);
  auto* rep = app.add_subcommand("reproduce", "Run a full experiment and check its acceptance gates");
  add_common(rep, false);
  auto* conv = app.add_subcommand("convergence-study", "Gradient error against the exact solution as M grows");
  add_common(conv, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!seed_str.empty()) o.seed = static_cast<unsigned>(std::stoul(seed_str));
    if (!tol_str.empty()) o.solver_tol = std::stod(tol_str);
  } catch (const std::exception&) {
    std::cerr << "invalid --seed or --solver-tol value\n";
    return 2;
  }

  try {
    if (*syn) return cmd_synthesize(o);
    if (*sim) return cmd_simulate(o);
    if (*ver) return cmd_verify(o);
    if (*rep) return cmd_reproduce(o);
    if (*conv) return cmd_convergence(o);
  } catch (const InputError& e) {
    error_json("input", e);
    return 2;
  } catch (const SynthesisError& e) {
    error_json("synthesis", e);
    return 1;
  } catch (const SimulationError& e) {
    error_json("simulation", e);
    return 1;
  } catch (const NumericalError& e) {
    error_json("numerical", e);
    return 1;
  } catch (const std::exception& e) {
    error_json("internal", e);
    return 1;
  }
  return 2;
}

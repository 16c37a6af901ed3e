#include "hjbk/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hjbk/errors.hpp"

namespace hjbk {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw InputError(where + ": unknown field '" + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::vector<std::vector<double>> matrix_rows(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw InputError(where + ": expected a nonempty array of rows");
  auto rows = j.get<std::vector<std::vector<double>>>();
  for (const auto& r : rows) {
    if (r.size() != rows.front().size() || r.empty()) throw InputError(where + ": rows must have equal, nonzero length");
  }
  return rows;
}

int system_dim(const std::string& name) {
  if (name == "poly1d") return 1;
  if (name == "radial2d" || name == "vanderpol") return 2;
  throw InputError("config: unknown system '" + name + "' (expected poly1d, radial2d or vanderpol)");
}

int system_inputs(const std::string& name) { return name == "radial2d" ? 2 : 1; }

PointSetConfig parse_points(const json& j, const std::string& where, bool allow_same) {
  if (!j.is_object() || !j.contains("type")) throw InputError(where + ": expected an object with a 'type'");
  const std::string type = j.at("type").get<std::string>();
  PointSetConfig p;
  if (type == "grid") {
    check_keys(j, {"type", "lower", "upper", "counts"}, where);
    p.kind = PointSetConfig::Kind::Grid;
    p.lower = j.at("lower").get<std::vector<double>>();
    p.upper = j.at("upper").get<std::vector<double>>();
    p.counts = j.at("counts").get<std::vector<int>>();
  } else if (type == "explicit") {
    check_keys(j, {"type", "points"}, where);
    p.kind = PointSetConfig::Kind::Explicit;
    p.points = matrix_rows(j.at("points"), where + ".points");
  } else if (type == "same_as_centers" && allow_same) {
    check_keys(j, {"type"}, where);
    p.kind = PointSetConfig::Kind::SameAsCenters;
  } else {
    throw InputError(where + ": unknown type '" + type + "'");
  }
  return p;
}

json points_json(const PointSetConfig& p) {
  switch (p.kind) {
    case PointSetConfig::Kind::Grid:
      return {{"type", "grid"}, {"lower", p.lower}, {"upper", p.upper}, {"counts", p.counts}};
    case PointSetConfig::Kind::Explicit:
      return {{"type", "explicit"}, {"points", p.points}};
    case PointSetConfig::Kind::SameAsCenters:
      return {{"type", "same_as_centers"}};
  }
  return {};
}

void check_point_dims(const PointSetConfig& p, int n, const std::string& where) {
  if (p.kind == PointSetConfig::Kind::Grid) {
    if (static_cast<int>(p.lower.size()) != n || static_cast<int>(p.upper.size()) != n ||
        static_cast<int>(p.counts.size()) != n) {
      throw InputError(where + ": grid bounds and counts must have dimension " + std::to_string(n));
    }
  } else if (p.kind == PointSetConfig::Kind::Explicit) {
    for (const auto& r : p.points) {
      if (static_cast<int>(r.size()) != n) throw InputError(where + ": points must have dimension " + std::to_string(n));
    }
  }
}

InitialConditionConfig parse_ics(const json& j) {
  const std::string where = "simulation.initial_conditions";
  if (!j.is_object() || !j.contains("type")) throw InputError(where + ": expected an object with a 'type'");
  InitialConditionConfig ic;
  ic.type = j.at("type").get<std::string>();
  if (ic.type == "explicit") {
    check_keys(j, {"type", "points"}, where);
    ic.points = j.at("points").get<std::vector<std::vector<double>>>();
  } else if (ic.type == "span") {
    check_keys(j, {"type", "from", "to", "count"}, where);
    ic.from = j.at("from").get<std::vector<double>>();
    ic.to = j.at("to").get<std::vector<double>>();
    ic.count = j.at("count").get<int>();
  } else if (ic.type == "circle") {
    check_keys(j, {"type", "radius", "count"}, where);
    ic.radius = j.at("radius").get<double>();
    ic.count = j.at("count").get<int>();
  } else {
    throw InputError(where + ": unknown type '" + ic.type + "'");
  }
  return ic;
}

json ics_json(const InitialConditionConfig& ic) {
  if (ic.type == "span") return {{"type", "span"}, {"from", ic.from}, {"to", ic.to}, {"count", ic.count}};
  if (ic.type == "circle") return {{"type", "circle"}, {"radius", ic.radius}, {"count", ic.count}};
  return {{"type", "explicit"}, {"points", ic.points}};
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> parse_optional_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ExperimentConfig parse_impl(const json& j) {
  check_keys(j, {"name", "system", "state_cost", "Q", "D", "R", "kernel", "centers", "collocation",
                 "hessian_relaxation", "precondition_blocks", "solver", "simulation", "verification", "convergence",
                 "gates", "output_dir", "seed"},
             "config");
  ExperimentConfig c;
  if (!j.contains("system")) throw InputError("config: missing required field 'system'");
  const json& sys = j.at("system");
  if (sys.is_string()) {
    c.system = sys.get<std::string>();
  } else {
    check_keys(sys, {"name", "mu"}, "config.system");
    c.system = sys.at("name").get<std::string>();
    c.mu = get_or(sys, "mu", 1.0);
  }
  const int n = system_dim(c.system);
  const int m = system_inputs(c.system);
  if (!(c.mu > 0.0)) throw InputError("config.system.mu must be > 0");
  c.name = get_or<std::string>(j, "name", c.system);

  c.state_cost = get_or<std::string>(j, "state_cost", "model");
  if (c.state_cost != "model" && c.state_cost != "quadratic") {
    throw InputError("config.state_cost must be 'model' or 'quadratic'");
  }
  if (j.contains("Q") && !j.at("Q").is_null()) c.Q = matrix_rows(j.at("Q"), "config.Q");
  if (j.contains("D") && j.contains("R")) throw InputError("config: give either 'D' or 'R', not both");
  for (const char* key : {"D", "R"}) {
    if (j.contains(key) && !j.at(key).is_null()) c.D = matrix_rows(j.at(key), std::string("config.") + key);
  }
  if (c.Q && (static_cast<int>(c.Q->size()) != n || static_cast<int>(c.Q->front().size()) != n)) {
    throw InputError("config.Q must be " + std::to_string(n) + " x " + std::to_string(n));
  }
  if (c.D && (static_cast<int>(c.D->size()) != m || static_cast<int>(c.D->front().size()) != m)) {
    throw InputError("config.D must be " + std::to_string(m) + " x " + std::to_string(m));
  }
  if (c.state_cost == "quadratic" && !c.Q) throw InputError("config: state_cost 'quadratic' requires Q");

  if (!j.contains("kernel")) throw InputError("config: missing required field 'kernel'");
  c.kernel = kernel_from_json(j.at("kernel"), n);
  if (!j.contains("centers")) throw InputError("config: missing required field 'centers'");
  c.centers = parse_points(j.at("centers"), "config.centers", false);
  check_point_dims(c.centers, n, "config.centers");
  if (j.contains("collocation")) c.collocation = parse_points(j.at("collocation"), "config.collocation", true);
  check_point_dims(c.collocation, n, "config.collocation");

  c.hessian_relaxation = get_or(j, "hessian_relaxation", 0.0);
  if (!(c.hessian_relaxation >= 0.0)) throw InputError("config.hessian_relaxation must be >= 0");
  c.precondition_blocks = get_or(j, "precondition_blocks", false);

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    check_keys(s, {"tolerance", "max_iterations"}, "config.solver");
    c.solver_tolerance = get_or(s, "tolerance", c.solver_tolerance);
    c.solver_max_iterations = get_or(s, "max_iterations", c.solver_max_iterations);
  }
  if (!(c.solver_tolerance > 0.0) || c.solver_max_iterations < 1) {
    throw InputError("config.solver: tolerance must be > 0 and max_iterations >= 1");
  }

  if (j.contains("simulation")) {
    const json& s = j.at("simulation");
    check_keys(s, {"horizon", "stepper", "step", "rel_tol", "output_samples", "initial_conditions"},
               "config.simulation");
    c.sim_horizon = get_or(s, "horizon", c.sim_horizon);
    c.sim_stepper = get_or(s, "stepper", c.sim_stepper);
    c.sim_step = get_or(s, "step", c.sim_step);
    c.sim_rel_tol = get_or(s, "rel_tol", c.sim_rel_tol);
    c.sim_output_samples = get_or(s, "output_samples", c.sim_output_samples);
    if (s.contains("initial_conditions")) c.initial_conditions = parse_ics(s.at("initial_conditions"));
  }
  if (c.sim_stepper != "rk4" && c.sim_stepper != "dopri5") {
    throw InputError("config.simulation.stepper must be 'rk4' or 'dopri5'");
  }
  simulation_config(c).validate();
  c.initial_conditions.build().expand(n);

  if (j.contains("verification")) {
    const json& v = j.at("verification");
    check_keys(v, {"off_grid_per_axis", "comparison_per_axis"}, "config.verification");
    c.off_grid_per_axis = get_or(v, "off_grid_per_axis", c.off_grid_per_axis);
    c.comparison_per_axis = get_or(v, "comparison_per_axis", c.comparison_per_axis);
  }
  if (c.off_grid_per_axis < 2 || c.comparison_per_axis < 2) {
    throw InputError("config.verification: per-axis counts must be >= 2");
  }

  if (j.contains("convergence")) {
    const json& v = j.at("convergence");
    check_keys(v, {"M", "quadrature_per_axis", "solver_tolerance", "noise"}, "config.convergence");
    c.convergence.M = get_or(v, "M", c.convergence.M);
    c.convergence.quadrature_per_axis = get_or(v, "quadrature_per_axis", c.convergence.quadrature_per_axis);
    c.convergence.solver_tolerance = get_or(v, "solver_tolerance", c.convergence.solver_tolerance);
    c.convergence.noise = get_or(v, "noise", c.convergence.noise);
  }

  if (j.contains("gates")) {
    const json& g = j.at("gates");
    check_keys(g, {"equilibrium", "hessian_residual", "min_collocation_eigenvalue", "max_final_norm",
                   "mean_final_norm", "require_decay", "soft_time_s"},
               "config.gates");
    c.gates.equilibrium = get_or(g, "equilibrium", c.gates.equilibrium);
    c.gates.hessian_residual = get_or(g, "hessian_residual", c.gates.hessian_residual);
    c.gates.min_collocation_eigenvalue = get_or(g, "min_collocation_eigenvalue", c.gates.min_collocation_eigenvalue);
    c.gates.max_final_norm = parse_optional_number(g, "max_final_norm");
    c.gates.mean_final_norm = parse_optional_number(g, "mean_final_norm");
    c.gates.require_decay = get_or(g, "require_decay", c.gates.require_decay);
    c.gates.soft_time_s = get_or(g, "soft_time_s", c.gates.soft_time_s);
  }

  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir);
  c.seed = get_or<unsigned>(j, "seed", c.seed);
  return c;
}

}  // namespace

int ExperimentConfig::dim() const { return system_dim(system); }

InitialConditions InitialConditionConfig::build() const {
  if (type == "span") return InitialConditions::span(to_vector(from), to_vector(to), count);
  if (type == "circle") return InitialConditions::circle(radius, count);
  std::vector<Eigen::VectorXd> pts;
  for (const auto& p : points) pts.push_back(to_vector(p));
  return InitialConditions::explicit_list(std::move(pts));
}

ExperimentConfig parse_config(const nlohmann::json& j) {
  try {
    return parse_impl(j);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config not found: " + path);
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

nlohmann::json serialize_config(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["system"] = {{"name", c.system}, {"mu", c.mu}};
  j["state_cost"] = c.state_cost;
  j["Q"] = c.Q ? json(*c.Q) : json(nullptr);
  j["D"] = c.D ? json(*c.D) : json(nullptr);
  j["kernel"] = kernel_to_json(c.kernel);
  j["centers"] = points_json(c.centers);
  j["collocation"] = points_json(c.collocation);
  j["hessian_relaxation"] = c.hessian_relaxation;
  j["precondition_blocks"] = c.precondition_blocks;
  j["solver"] = {{"tolerance", c.solver_tolerance}, {"max_iterations", c.solver_max_iterations}};
  j["simulation"] = {{"horizon", c.sim_horizon},       {"stepper", c.sim_stepper},
                     {"step", c.sim_step},             {"rel_tol", c.sim_rel_tol},
                     {"output_samples", c.sim_output_samples}, {"initial_conditions", ics_json(c.initial_conditions)}};
  j["verification"] = {{"off_grid_per_axis", c.off_grid_per_axis}, {"comparison_per_axis", c.comparison_per_axis}};
  j["convergence"] = {{"M", c.convergence.M},
                      {"quadrature_per_axis", c.convergence.quadrature_per_axis},
                      {"solver_tolerance", c.convergence.solver_tolerance},
                      {"noise", c.convergence.noise}};
  j["gates"] = {{"equilibrium", c.gates.equilibrium},
                {"hessian_residual", c.gates.hessian_residual},
                {"min_collocation_eigenvalue", c.gates.min_collocation_eigenvalue},
                {"max_final_norm", optional_number(c.gates.max_final_norm)},
                {"mean_final_norm", optional_number(c.gates.mean_final_norm)},
                {"require_decay", c.gates.require_decay},
                {"soft_time_s", c.gates.soft_time_s}};
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  return j;
}

SolverSettings solver_settings(const ExperimentConfig& c) {
  SolverSettings s;
  s.tolerance = c.solver_tolerance;
  s.max_iterations = c.solver_max_iterations;
  return s;
}

SimulationConfig simulation_config(const ExperimentConfig& c) {
  SimulationConfig s;
  s.horizon = c.sim_horizon;
  s.stepper = c.sim_stepper == "dopri5" ? SimulationConfig::Stepper::DormandPrince
                                        : SimulationConfig::Stepper::RungeKutta4;
  s.step = c.sim_step;
  s.rel_tol = c.sim_rel_tol;
  s.output_samples = c.sim_output_samples;
  s.initial = c.initial_conditions.build();
  return s;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

namespace {

ExperimentConfig base_1d() {
  ExperimentConfig c;
  c.system = "poly1d";
  c.kernel = KernelSpec::polynomial(1, 4, 1.0);
  c.centers = {PointSetConfig::Kind::Grid, {-1.5}, {1.5}, {25}, {}};
  c.sim_horizon = 10.0;
  c.initial_conditions.type = "explicit";
  c.initial_conditions.points = {{-1.2}, {-0.8}, {-0.4}, {0.4}, {0.8}, {1.2}};
  c.off_grid_per_axis = 100;
  c.comparison_per_axis = 200;
  c.convergence.M = {9, 15, 25};
  c.gates.hessian_residual = 1e-4;
  c.gates.max_final_norm = 1e-4;
  c.gates.soft_time_s = 30.0;
  return c;
}

ExperimentConfig base_2d() {
  ExperimentConfig c;
  c.system = "radial2d";
  c.kernel = KernelSpec::polynomial(2, 4, 1.0);
  c.centers = {PointSetConfig::Kind::Grid, {-1.5, -1.5}, {1.5, 1.5}, {10, 10}, {}};
  c.sim_horizon = 10.0;
  c.initial_conditions.type = "circle";
  c.initial_conditions.radius = 1.0;
  c.initial_conditions.count = 8;
  c.off_grid_per_axis = 40;
  c.comparison_per_axis = 50;
  c.convergence.M = {16, 36, 64, 100};
  c.convergence.quadrature_per_axis = 41;
  c.gates.hessian_residual = 1.0;
  c.gates.max_final_norm = 1e-2;
  c.gates.soft_time_s = 120.0;
  return c;
}

}  // namespace

std::vector<std::string> builtin_experiment_names() {
  return {"poly1d", "radial2d", "vanderpol", "poly1d_exact", "radial2d_exact"};
}

ExperimentConfig builtin_experiment(const std::string& name) {
  ExperimentConfig c;
  if (name == "poly1d") {
    c = base_1d();
    c.state_cost = "quadratic";
    c.Q = std::vector<std::vector<double>>{{2.0}};
  } else if (name == "poly1d_exact") {
    c = base_1d();
  } else if (name == "radial2d") {
    c = base_2d();
    c.state_cost = "quadratic";
    c.Q = std::vector<std::vector<double>>{{2.0, 0.0}, {0.0, 2.0}};
  } else if (name == "radial2d_exact") {
    c = base_2d();
  } else if (name == "vanderpol") {
    c.system = "vanderpol";
    c.mu = 1.0;
    c.Q = std::vector<std::vector<double>>{{2.0, 0.0}, {0.0, 2.0}};
    c.D = std::vector<std::vector<double>>{{1.0}};
    c.kernel = KernelSpec::polynomial(2, 4, 1.0);
    c.centers = {PointSetConfig::Kind::Grid, {-2.0, -2.0}, {2.0, 2.0}, {10, 10}, {}};
    c.hessian_relaxation = 0.5;
    c.sim_horizon = 20.0;
    c.initial_conditions.type = "circle";
    c.initial_conditions.radius = 1.5;
    c.initial_conditions.count = 8;
    c.off_grid_per_axis = 40;
    c.comparison_per_axis = 50;
    c.gates.hessian_residual = 1.5;
    c.gates.max_final_norm = 1e-5;
    c.gates.mean_final_norm = 1e-5;
    c.gates.soft_time_s = 120.0;
  } else {
    throw InputError("unknown experiment '" + name + "' (expected poly1d, radial2d, vanderpol, poly1d_exact or radial2d_exact)");
  }
  c.name = name;
  c.output_dir = "out/" + name;
  return c;
}

}  // namespace hjbk

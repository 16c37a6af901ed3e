#include "hjbk/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hjbk/errors.hpp"

namespace hjbk {

namespace fs = std::filesystem;

SystemModel build_model(const ExperimentConfig& config) {
  SystemModel model;
  if (config.system == "vanderpol") {
    const Eigen::Matrix2d W = config.Q ? Eigen::Matrix2d(to_matrix(*config.Q)) : Eigen::Matrix2d(2.0 * Eigen::Matrix2d::Identity());
    const double r = config.D ? (*config.D)[0][0] : 1.0;
    model = builtin_vdp(config.mu, W, r);
  } else {
    model = builtin_by_name(config.system, config.mu);
  }
  if (config.state_cost == "quadratic") model = with_quadratic_state_cost(model, to_matrix(*config.Q));
  if (config.D) model.control_weight = to_matrix(*config.D);
  model.validate();
  return model;
}

PreparedModel prepare_model(const ExperimentConfig& config) {
  PreparedModel p;
  p.model = build_model(config);
  p.lin = linearize(p.model);
  if (config.Q) p.lin.Q = to_matrix(*config.Q);
  p.are = solve_are(p.lin, p.model.control_weight);
  return p;
}

namespace {

Eigen::MatrixXd explicit_points(const std::vector<std::vector<double>>& rows) { return to_matrix(rows).transpose(); }

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

CenterSet build_centers(const ExperimentConfig& config) {
  const PointSetConfig& p = config.centers;
  if (p.kind == PointSetConfig::Kind::Grid) return CenterSet::uniform_grid(to_vec(p.lower), to_vec(p.upper), p.counts);
  CenterSet c;
  c.points = explicit_points(p.points);
  c.descriptor = "explicit";
  return c;
}

CollocationGrid build_collocation(const ExperimentConfig& config, const CenterSet& centers) {
  const PointSetConfig& p = config.collocation;
  switch (p.kind) {
    case PointSetConfig::Kind::SameAsCenters:
      return CollocationGrid::same_as(centers);
    case PointSetConfig::Kind::Grid:
      return CollocationGrid::uniform_grid(to_vec(p.lower), to_vec(p.upper), p.counts);
    case PointSetConfig::Kind::Explicit: {
      CollocationGrid g;
      g.points = explicit_points(p.points);
      return g;
    }
  }
  return CollocationGrid::same_as(centers);
}

SynthesisRun run_synthesis(const ExperimentConfig& config) {
  SynthesisRun run;
  run.prepared = prepare_model(config);
  const CenterSet centers = build_centers(config);
  SynthesisOptions opts;
  opts.hessian_relaxation = config.hessian_relaxation;
  opts.precondition_blocks = config.precondition_blocks;
  run.problem = assemble(run.prepared.model, config.kernel, centers, build_collocation(config, centers),
                         run.prepared.are.P, opts);
  run.outcome = synthesize(run.problem, solver_settings(config));
  return run;
}

SimulationResult run_simulation(const ExperimentConfig& config, const SystemModel& model, const ValueFunction& vf) {
  return run_batch(
      model, [&vf](const Eigen::VectorXd& x) { return vf.control(x); }, simulation_config(config),
      [&vf](const Eigen::VectorXd& x) { return vf.value(x); });
}

VerificationReport build_report(const ExperimentConfig& config, const SystemModel& model, const ValueFunction& vf,
                                const CollocationGrid& collocation, const SimulationResult* batch) {
  VerificationReport r;
  r.system = config.name;
  r.equilibrium = equilibrium_check(vf, vf.P_target());
  r.collocation = residual_scan(vf, model, collocation.points);
  r.off_grid = residual_scan(vf, model, dense_grid(model.domain, config.off_grid_per_axis));
  if (model.exact) r.comparison = compare_exact(vf, model, dense_grid(model.domain, config.comparison_per_axis));
  if (batch) {
    r.suboptimality = suboptimality_estimate(vf, model, *batch, r.collocation.eps_hat);
    r.stability = batch->decay;
    r.decrease = lyapunov_decrease(*batch);
  }
  return r;
}

namespace {

Gate make_gate(std::string name, double value, std::string op, double threshold, bool soft = false) {
  Gate g{std::move(name), value, std::move(op), threshold, soft, false};
  if (g.op == "<") g.pass = value < threshold;
  else if (g.op == "<=") g.pass = value <= threshold;
  else if (g.op == ">") g.pass = value > threshold;
  else g.pass = value >= threshold;
  return g;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

ReproduceOutcome reproduce(const ExperimentConfig& config, const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const SynthesisRun run = run_synthesis(config);
  const auto t1 = std::chrono::steady_clock::now();
  const SystemModel& model = run.prepared.model;
  const ValueFunction& vf = run.outcome.vf;
  const SimulationResult batch = run_simulation(config, model, vf);
  const VerificationReport report = build_report(config, model, vf, run.problem.grid, &batch);
  const double solve_time = std::chrono::duration<double>(t1 - t0).count();

  ReproduceOutcome out;
  const GateConfig& g = config.gates;
  out.gates.push_back(make_gate("|V(0)|", report.equilibrium.value, "<", g.equilibrium));
  out.gates.push_back(make_gate("|grad V(0)|", report.equilibrium.gradient, "<", g.equilibrium));
  out.gates.push_back(make_gate("|Hess V(0) - P|_F", report.equilibrium.hessian, "<=", g.hessian_residual));
  out.gates.push_back(
      make_gate("min eig M_j(p*)", run.outcome.min_collocation_eigenvalue, ">=", g.min_collocation_eigenvalue));
  if (g.max_final_norm) out.gates.push_back(make_gate("max final norm", batch.max_final_norm, "<=", *g.max_final_norm));
  if (g.mean_final_norm) {
    out.gates.push_back(make_gate("mean final norm", batch.mean_final_norm, "<=", *g.mean_final_norm));
  }
  if (g.require_decay) out.gates.push_back(make_gate("decay rate beta", batch.decay.beta, ">", 0.0));
  out.gates.push_back(make_gate("solve time [s]", solve_time, "<=", g.soft_time_s, true));
  out.passed = true;
  for (const auto& gate : out.gates) out.passed = out.passed && (gate.soft || gate.pass);

  nlohmann::json gates = nlohmann::json::array();
  for (const auto& gate : out.gates) {
    if (gate.soft) continue;
    gates.push_back({{"name", gate.name}, {"value", gate.value}, {"op", gate.op}, {"threshold", gate.threshold},
                     {"pass", gate.pass}});
  }
  nlohmann::json& s = out.summary;
  s["experiment"] = config.name;
  s["system"] = config.system;
  s["dimension"] = model.n;
  s["M"] = run.problem.num_coefficients();
  s["collocation_points"] = run.problem.grid.size();
  s["initial_conditions"] = batch.trajectories.size();
  s["max_final_norm"] = batch.max_final_norm;
  s["mean_final_norm"] = batch.mean_final_norm;
  s["hessian_residual"] = report.equilibrium.hessian;
  s["value_residual"] = report.equilibrium.value;
  s["gradient_residual"] = report.equilibrium.gradient;
  s["min_collocation_eigenvalue"] = run.outcome.min_collocation_eigenvalue;
  s["P"] = matrix_json(run.prepared.are.P);
  s["are_residual"] = run.prepared.are.residual_norm;
  s["hessian_at_origin"] = matrix_json(vf.hessian(Eigen::VectorXd::Zero(model.n)));
  s["objective"] = run.outcome.stats.objective;
  s["solver"] = {{"status", to_string(run.outcome.stats.status)},
                 {"iterations", run.outcome.stats.iterations},
                 {"phase1_iterations", run.outcome.stats.phase1_iterations},
                 {"duality_gap", run.outcome.stats.duality_gap},
                 {"primal_residual", run.outcome.stats.primal_residual},
                 {"warnings", run.outcome.stats.warnings}};
  s["decay"] = {{"alpha", batch.decay.alpha}, {"beta", batch.decay.beta}};
  s["gates"] = gates;
  s["passed"] = out.passed;
  s["timing"] = {{"solve_time_s", solve_time}, {"solver_wall_time_s", run.outcome.stats.wall_time_s}};

  if (!out_dir.empty()) {
    const fs::path dir(out_dir);
    write_file_atomic((dir / "vf.json").string(), vf.to_json().dump(2) + "\n");
    write_file_atomic((dir / "trajectories.csv").string(), trajectories_csv(batch));
    nlohmann::json bs = batch_summary(batch);
    write_file_atomic((dir / "batch_summary.json").string(), bs.dump(2) + "\n");
    write_file_atomic((dir / "report.json").string(), report.to_json().dump(2) + "\n");
    write_file_atomic((dir / "report.txt").string(), report.to_text());
    write_file_atomic((dir / "summary.json").string(), s.dump(2) + "\n");
    write_file_atomic((dir / "config.json").string(), serialize_config(config).dump(2) + "\n");
  }
  return out;
}

std::string gate_table(const std::vector<Gate>& gates) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "gate" << std::setw(14) << "value" << std::setw(4) << "op" << std::setw(12)
     << "threshold" << "result\n";
  for (const auto& g : gates) {
    std::ostringstream v, t;
    v << std::setprecision(4) << std::scientific << g.value;
    t << std::setprecision(3) << std::scientific << g.threshold;
    os << std::left << std::setw(22) << g.name << std::setw(14) << v.str() << std::setw(4) << g.op << std::setw(12)
       << t.str() << (g.soft ? (g.pass ? "ok (soft)" : "SLOW (soft)") : (g.pass ? "PASS" : "FAIL")) << "\n";
  }
  return os.str();
}

nlohmann::json convergence_json(const ConvergenceStudy& study) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& p : study.points) {
    nlohmann::json row = {{"M", p.M}, {"ok", p.ok}, {"fill_distance", p.fill_distance}};
    if (p.ok) row["gradient_error"] = p.gradient_error;
    else row["failure"] = p.failure;
    rows.push_back(row);
  }
  nlohmann::json j = {{"points", rows}, {"nonincreasing", study.nonincreasing}, {"noise", study.noise}};
  j["slope"] = study.slope_available ? nlohmann::json(study.slope) : nlohmann::json(nullptr);
  return j;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace hjbk

#include "hjbk/synthesis.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "hjbk/errors.hpp"

namespace hjbk {

CollocationGrid CollocationGrid::same_as(const CenterSet& centers) {
  CollocationGrid g;
  g.points = centers.points;
  g.descriptor = "same-as-centers";
  return g;
}

CollocationGrid CollocationGrid::uniform_grid(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                              const std::vector<int>& counts) {
  const CenterSet c = CenterSet::uniform_grid(lower, upper, counts);
  CollocationGrid g;
  g.points = c.points;
  g.descriptor = c.descriptor;
  return g;
}

int SynthesisProblem::equality_rows() const {
  const int n = model.n;
  const bool hess_eq = options.enforce_hessian && options.hessian_relaxation == 0.0;
  return 1 + n + (hess_eq ? n * (n + 1) / 2 : 0);
}

int SynthesisProblem::inequality_rows() const {
  const int n = model.n;
  const bool hess_ineq = options.enforce_hessian && options.hessian_relaxation > 0.0;
  return hess_ineq ? n * (n + 1) : 0;
}

SynthesisProblem assemble(const SystemModel& model, const KernelSpec& kernel, const CenterSet& centers,
                          const CollocationGrid& grid, const Eigen::MatrixXd& P_target,
                          const SynthesisOptions& options) {
  model.validate();
  kernel.validate();
  const int n = model.n;
  if (kernel.dim != n) throw InputError("assemble: kernel dimension does not match the system");
  if (centers.size() < 1 || centers.dim() != n) throw InputError("assemble: centers must be nonempty n-vectors");
  if (grid.size() < 1 || grid.points.rows() != n) throw InputError("assemble: collocation grid must be nonempty");
  if (P_target.rows() != n || P_target.cols() != n) throw InputError("assemble: P_target must be n x n");
  if (!(options.hessian_relaxation >= 0.0)) throw InputError("assemble: hessian_relaxation must be >= 0");
  for (int i = 0; i < centers.size(); ++i) {
    if (!model.domain.contains(centers.point(i))) {
      throw InputError("assemble: center " + std::to_string(i) + " lies outside the domain");
    }
  }
  for (int j = 0; j < grid.size(); ++j) {
    if (!model.domain.contains(grid.point(j))) {
      throw InputError("assemble: collocation point " + std::to_string(j) + " lies outside the domain");
    }
  }

  SynthesisProblem prob;
  prob.model = model;
  prob.kernel = kernel;
  prob.centers = centers;
  prob.grid = grid;
  prob.P_target = 0.5 * (P_target + P_target.transpose());
  prob.options = options;

  const int M = centers.size();
  if (M < prob.equality_rows()) {
    prob.warnings.push_back("only " + std::to_string(M) + " coefficients for " + std::to_string(prob.equality_rows()) +
                            " equality rows; the program is likely infeasible");
  }

  prob.points.resize(static_cast<std::size_t>(grid.size()));
  for (int j = 0; j < grid.size(); ++j) {
    const Eigen::VectorXd x = grid.point(j);
    const FeatureRows fr = feature_rows(kernel, centers, x);
    CollocationData& d = prob.points[static_cast<std::size_t>(j)];
    d.x = x;
    d.drift_row = fr.G.transpose() * model.drift(x);
    d.input_rows = fr.G.transpose() * model.input_map(x);
    d.q = model.state_cost(x);
  }
  prob.origin = feature_rows(kernel, centers, Eigen::VectorXd::Zero(n));
  return prob;
}

namespace {

double block_scale(const SynthesisProblem& problem, int j) {
  if (!problem.options.precondition_blocks) return 1.0;
  return 1.0 / std::max(1.0, std::abs(2.0 * problem.points[static_cast<std::size_t>(j)].q));
}

}  // namespace

Eigen::MatrixXd lmi_block(const SynthesisProblem& problem, int j, const Eigen::VectorXd& p) {
  if (j < 0 || j >= problem.grid.size()) throw InputError("lmi_block: collocation index out of range");
  if (p.size() != problem.num_coefficients()) throw InputError("lmi_block: coefficient vector has the wrong size");
  const CollocationData& d = problem.points[static_cast<std::size_t>(j)];
  const int m = problem.model.m;
  const double a = block_scale(problem, j);
  const double ra = std::sqrt(a);
  Eigen::MatrixXd B(1 + m, 1 + m);
  B(0, 0) = a * 2.0 * (p.dot(d.drift_row) + d.q);
  const Eigen::VectorXd off = ra * (d.input_rows.transpose() * p);
  B.block(0, 1, 1, m) = off.transpose();
  B.block(1, 0, m, 1) = off;
  B.bottomRightCorner(m, m) = problem.model.control_weight;
  return B;
}

ConicProgram to_conic(const SynthesisProblem& problem) {
  const int n = problem.model.n;
  const int m = problem.model.m;
  const int M = problem.num_coefficients();
  ConicProgram prog;
  prog.num_vars = M;

  std::vector<std::pair<int, int>> upper;
  for (int l = 0; l < n; ++l)
    for (int k = l; k < n; ++k) upper.emplace_back(l, k);

  prog.eq_matrix.resize(problem.equality_rows(), M);
  prog.eq_rhs = Eigen::VectorXd::Zero(problem.equality_rows());
  prog.eq_matrix.row(0) = problem.origin.k.transpose();
  prog.eq_matrix.middleRows(1, n) = problem.origin.G;
  if (problem.equality_rows() > 1 + n) {
    for (std::size_t r = 0; r < upper.size(); ++r) {
      const auto [l, k] = upper[r];
      for (int i = 0; i < M; ++i) prog.eq_matrix(1 + n + static_cast<int>(r), i) = problem.origin.H[static_cast<std::size_t>(i)](l, k);
      prog.eq_rhs[1 + n + static_cast<int>(r)] = problem.P_target(l, k);
    }
  }

  // Each relaxed Hessian entry is one two-sided row (two one-sided inequalities).
  if (problem.inequality_rows() > 0) {
    const double eps = problem.options.hessian_relaxation;
    const int rows = static_cast<int>(upper.size());
    prog.ineq_matrix.resize(rows, M);
    prog.ineq_lower.resize(rows);
    prog.ineq_upper.resize(rows);
    for (int r = 0; r < rows; ++r) {
      const auto [l, k] = upper[static_cast<std::size_t>(r)];
      for (int i = 0; i < M; ++i) prog.ineq_matrix(r, i) = problem.origin.H[static_cast<std::size_t>(i)](l, k);
      prog.ineq_lower[r] = problem.P_target(l, k) - eps;
      prog.ineq_upper[r] = problem.P_target(l, k) + eps;
    }
  } else {
    prog.ineq_matrix.resize(0, M);
    prog.ineq_lower.resize(0);
    prog.ineq_upper.resize(0);
  }

  const int s = 1 + m;
  for (int j = 0; j < problem.grid.size(); ++j) {
    const CollocationData& d = problem.points[static_cast<std::size_t>(j)];
    const double a = block_scale(problem, j);
    const double ra = std::sqrt(a);
    PsdBlock blk;
    blk.constant = Eigen::MatrixXd::Zero(s, s);
    blk.constant(0, 0) = a * 2.0 * d.q;
    blk.constant.bottomRightCorner(m, m) = problem.model.control_weight;
    blk.coeffs.resize(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) {
      Eigen::MatrixXd C = Eigen::MatrixXd::Zero(s, s);
      C(0, 0) = a * 2.0 * d.drift_row[i];
      for (int c = 0; c < m; ++c) {
        C(0, 1 + c) = ra * d.input_rows(i, c);
        C(1 + c, 0) = C(0, 1 + c);
      }
      blk.coeffs[static_cast<std::size_t>(i)] = std::move(C);
    }
    prog.blocks.push_back(std::move(blk));
  }
  return prog;
}

ValueFunction::ValueFunction(Eigen::VectorXd p, KernelSpec kernel, CenterSet centers, const SystemModel& model,
                             Eigen::MatrixXd P_target)
    : p_(std::move(p)), kernel_(kernel), centers_(std::move(centers)), D_(model.control_weight),
      input_map_(model.input_map), P_target_(std::move(P_target)), system_(model.name) {
  if (p_.size() != centers_.size()) throw InputError("ValueFunction: one coefficient per center required");
  if (kernel_.dim != model.n || centers_.dim() != model.n) throw InputError("ValueFunction: dimension mismatch");
}

double ValueFunction::value(const Eigen::VectorXd& x) const {
  double v = 0.0;
  for (int i = 0; i < centers_.size(); ++i) v += p_[i] * eval(kernel_, x, centers_.point(i));
  return v;
}

Eigen::VectorXd ValueFunction::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(kernel_.dim);
  for (int i = 0; i < centers_.size(); ++i) g += p_[i] * grad_x(kernel_, x, centers_.point(i));
  return g;
}

Eigen::MatrixXd ValueFunction::hessian(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(kernel_.dim, kernel_.dim);
  for (int i = 0; i < centers_.size(); ++i) h += p_[i] * hess_x(kernel_, x, centers_.point(i));
  return h;
}

Eigen::VectorXd ValueFunction::control(const Eigen::VectorXd& x) const {
  return -D_.ldlt().solve(input_map_(x).transpose() * gradient(x));
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw InputError(std::string("value function: bad ") + what);
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (j[static_cast<std::size_t>(r)].size() != static_cast<std::size_t>(cols)) {
      throw InputError(std::string("value function: ragged ") + what);
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json ValueFunction::to_json() const {
  nlohmann::json j;
  j["system"] = system_;
  j["kernel"] = kernel_to_json(kernel_);
  j["dim"] = kernel_.dim;
  j["centers_descriptor"] = centers_.descriptor;
  j["centers"] = matrix_json(centers_.points.transpose());
  j["coefficients"] = std::vector<double>(p_.data(), p_.data() + p_.size());
  j["control_weight"] = matrix_json(D_);
  j["P_target"] = matrix_json(P_target_);
  return j;
}

ValueFunction ValueFunction::from_json(const nlohmann::json& j, const SystemModel& model) {
  try {
    const int dim = j.at("dim").get<int>();
    if (dim != model.n) {
      throw InputError("value function dimension " + std::to_string(dim) + " does not match system dimension " +
                       std::to_string(model.n));
    }
    const KernelSpec kernel = kernel_from_json(j.at("kernel"), dim);
    CenterSet centers;
    centers.points = matrix_from_json(j.at("centers"), "centers").transpose();
    centers.descriptor = j.value("centers_descriptor", "explicit");
    const auto coeffs = j.at("coefficients").get<std::vector<double>>();
    const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
    SystemModel bound = model;
    bound.control_weight = matrix_from_json(j.at("control_weight"), "control_weight");
    if (bound.control_weight.rows() != model.m || bound.control_weight.cols() != model.m) {
      throw InputError("value function control weight does not match the system input dimension");
    }
    ValueFunction vf(p, kernel, centers, bound, matrix_from_json(j.at("P_target"), "P_target"));
    vf.system_ = j.value("system", model.name);
    return vf;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("value function: ") + e.what());
  }
}

EquilibriumResiduals equilibrium_residuals(const ValueFunction& vf, const Eigen::MatrixXd& P_target) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(vf.dim());
  EquilibriumResiduals r;
  r.value = std::abs(vf.value(zero));
  r.gradient = vf.gradient(zero).norm();
  r.hessian = (vf.hessian(zero) - P_target).norm();
  return r;
}

ValueFunction extract(const Eigen::VectorXd& p, const SynthesisProblem& problem) {
  ValueFunction vf(p, problem.kernel, problem.centers, problem.model, problem.P_target);
  const EquilibriumResiduals r = equilibrium_residuals(vf, problem.P_target);
  if (!(r.value < 1e-6)) throw SynthesisError("extract: |V(0)| = " + std::to_string(r.value) + " exceeds 1e-6");
  if (!(r.gradient < 1e-6)) throw SynthesisError("extract: |grad V(0)| = " + std::to_string(r.gradient) + " exceeds 1e-6");
  if (problem.options.enforce_hessian) {
    const double bound = problem.model.n * problem.options.hessian_relaxation + 1e-4;
    if (!(r.hessian <= bound)) {
      throw SynthesisError("extract: |Hess V(0) - P|_F = " + std::to_string(r.hessian) + " exceeds " +
                           std::to_string(bound));
    }
  }
  return vf;
}

SynthesisOutcome synthesize(const SynthesisProblem& problem, const SolverSettings& settings) {
  const ConicProgram prog = to_conic(problem);
  SolveResult res = solve_conic(prog, settings);
  SynthesisOutcome out;
  out.stats = std::move(res.stats);
  for (const auto& w : problem.warnings) out.stats.warnings.push_back(w);
  out.vf = extract(res.p, problem);
  out.equilibrium = equilibrium_residuals(out.vf, problem.P_target);
  out.min_collocation_eigenvalue = std::numeric_limits<double>::infinity();
  for (int j = 0; j < problem.grid.size(); ++j) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lmi_block(problem, j, res.p), Eigen::EigenvaluesOnly);
    out.min_collocation_eigenvalue = std::min(out.min_collocation_eigenvalue, es.eigenvalues().minCoeff());
  }
  return out;
}

}  // namespace hjbk

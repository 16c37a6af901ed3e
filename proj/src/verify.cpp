#include "hjbk/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "hjbk/errors.hpp"
#include "hjbk/riccati.hpp"

namespace hjbk {

double hjb_residual(const ValueFunction& vf, const SystemModel& model, const Eigen::VectorXd& x) {
  return hjb_expression(model, x, vf.gradient(x));
}

double lmi_margin(const ValueFunction& vf, const SystemModel& model, const Eigen::VectorXd& x) {
  const int m = model.m;
  const Eigen::VectorXd gv = vf.gradient(x);
  const Eigen::VectorXd off = model.input_map(x).transpose() * gv;
  Eigen::MatrixXd M(1 + m, 1 + m);
  M(0, 0) = 2.0 * (gv.dot(model.drift(x)) + model.state_cost(x));
  M.block(0, 1, 1, m) = off.transpose();
  M.block(1, 0, m, 1) = off;
  M.bottomRightCorner(m, m) = model.control_weight;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

EquilibriumResiduals equilibrium_check(const ValueFunction& vf, const Eigen::MatrixXd& P_target) {
  return equilibrium_residuals(vf, P_target);
}

Eigen::MatrixXd dense_grid(const Box& box, int per_axis) {
  return CenterSet::uniform_grid(box.lower, box.upper, std::vector<int>(static_cast<std::size_t>(box.dim()), per_axis))
      .points;
}

ResidualScan residual_scan(const ValueFunction& vf, const SystemModel& model, const Eigen::MatrixXd& points) {
  ResidualScan s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  s.min_lmi = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const Eigen::VectorXd x = points.col(j);
    const double r = hjb_residual(vf, model, x);
    s.min = std::min(s.min, r);
    s.max = std::max(s.max, r);
    s.min_lmi = std::min(s.min_lmi, lmi_margin(vf, model, x));
  }
  s.points = static_cast<int>(points.cols());
  s.eps_hat = std::max(0.0, -s.min);
  return s;
}

std::vector<SuboptimalityRow> suboptimality_estimate(const ValueFunction& /*vf*/, const SystemModel& model,
                                                     const SimulationResult& batch, double eps_hat) {
  std::vector<SuboptimalityRow> rows;
  for (const Trajectory& tr : batch.trajectories) {
    SuboptimalityRow row;
    row.label = tr.label;
    row.settling_time = tr.t[tr.t.size() - 1];
    for (Eigen::Index k = 0; k < tr.t.size(); ++k) {
      if (tr.norm[k] <= kSettlingThreshold) {
        row.settling_time = tr.t[k];
        row.settled = true;
        break;
      }
    }
    row.bound = eps_hat * row.settling_time;
    row.cost = cost_of_trajectory(model, tr);
    if (model.exact && model.exact->optimal_for_cost) {
      row.exact_value = model.exact->value(tr.x0);
      row.gap = row.cost - *row.exact_value;
    }
    rows.push_back(row);
  }
  return rows;
}

ExactComparison compare_exact(const ValueFunction& vf, const SystemModel& model, const Eigen::MatrixXd& points) {
  ExactComparison c;
  if (!model.exact) return c;
  c.applicable = true;
  const ExactSolution& ex = *model.exact;
  const double v0 = vf.value(Eigen::VectorXd::Zero(model.n));
  const auto N = static_cast<double>(points.cols());
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const Eigen::VectorXd x = points.col(j);
    const double ev = std::abs(vf.value(x) - v0 - ex.value(x));
    const double eg = (vf.gradient(x) - ex.gradient(x)).norm();
    const double eu = (vf.control(x) - ex.control(x)).norm();
    c.max_value_error = std::max(c.max_value_error, ev);
    c.max_gradient_error = std::max(c.max_gradient_error, eg);
    c.max_control_error = std::max(c.max_control_error, eu);
    c.mean_value_error += ev / N;
    c.mean_gradient_error += eg / N;
    c.mean_control_error += eu / N;
  }
  // Boundary samples: grid points with at least one coordinate on a face of the box.
  c.min_boundary_gap = std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd bgrid = dense_grid(model.domain, 21);
  for (Eigen::Index j = 0; j < bgrid.cols(); ++j) {
    const Eigen::VectorXd x = bgrid.col(j);
    bool on_face = false;
    for (int i = 0; i < model.n; ++i) {
      on_face = on_face || x[i] == model.domain.lower[i] || x[i] == model.domain.upper[i];
    }
    if (!on_face) continue;
    c.min_boundary_gap = std::min(c.min_boundary_gap, vf.value(x) - v0 - ex.value(x));
  }
  c.dominates_on_boundary = c.min_boundary_gap >= 0.0;
  return c;
}

LyapunovDecrease lyapunov_decrease(const SimulationResult& batch, double tol) {
  LyapunovDecrease d;
  d.max_increase = -std::numeric_limits<double>::infinity();
  for (const Trajectory& tr : batch.trajectories) {
    if (tr.value.size() < 2) throw InputError("lyapunov_decrease: trajectories were recorded without V");
    for (Eigen::Index k = 1; k < tr.value.size(); ++k) {
      const double inc = tr.value[k] - tr.value[k - 1];
      d.max_increase = std::max(d.max_increase, inc);
      if (inc > tol) ++d.violations;
    }
  }
  return d;
}

namespace {

std::vector<int> per_axis_counts(int M, int n) {
  const int k = static_cast<int>(std::lround(std::pow(static_cast<double>(M), 1.0 / n)));
  int total = 1;
  for (int i = 0; i < n; ++i) total *= k;
  if (total != M) {
    throw InputError("convergence_study: M = " + std::to_string(M) + " is not a perfect " + std::to_string(n) +
                     "-th power");
  }
  return std::vector<int>(static_cast<std::size_t>(n), k);
}

}  // namespace

ConvergenceStudy convergence_study(const SystemModel& model, const KernelSpec& kernel, const std::vector<int>& Ms,
                                   const Eigen::MatrixXd& P_target, const Eigen::MatrixXd& quadrature,
                                   const SolverSettings& settings, const SynthesisOptions& options, double noise) {
  if (!model.exact) throw InputError("convergence_study: the model has no exact solution");
  ConvergenceStudy study;
  study.noise = noise;
  const int n = model.n;
  const int needed = 1 + n + (options.hessian_relaxation == 0.0 && options.enforce_hessian ? n * (n + 1) / 2 : 0);
  for (int M : Ms) {
    ConvergencePoint pt;
    pt.M = M;
    try {
      const auto counts = per_axis_counts(M, n);
      double h = 0.0;
      for (int i = 0; i < n; ++i) {
        const double width = model.domain.upper[i] - model.domain.lower[i];
        const double sp = counts[static_cast<std::size_t>(i)] > 1 ? width / (counts[static_cast<std::size_t>(i)] - 1) : width;
        h += 0.25 * sp * sp;
      }
      pt.fill_distance = std::sqrt(h);
      if (M < needed) {
        pt.failure = "infeasible: fewer coefficients than equality rows";
        study.points.push_back(pt);
        continue;
      }
      const CenterSet centers = CenterSet::uniform_grid(model.domain.lower, model.domain.upper, counts);
      const SynthesisProblem prob =
          assemble(model, kernel, centers, CollocationGrid::same_as(centers), P_target, options);
      const SynthesisOutcome out = synthesize(prob, settings);
      double sq = 0.0;
      for (Eigen::Index j = 0; j < quadrature.cols(); ++j) {
        const Eigen::VectorXd x = quadrature.col(j);
        sq += (out.vf.gradient(x) - model.exact->gradient(x)).squaredNorm();
      }
      pt.gradient_error = std::sqrt(sq / static_cast<double>(quadrature.cols()));
      pt.ok = true;
    } catch (const std::exception& e) {
      pt.failure = e.what();
    }
    study.points.push_back(pt);
  }

  std::vector<const ConvergencePoint*> good;
  for (const auto& p : study.points)
    if (p.ok) good.push_back(&p);
  study.nonincreasing = !good.empty();
  for (std::size_t i = 1; i < good.size(); ++i) {
    if (good[i]->gradient_error > good[i - 1]->gradient_error + noise) study.nonincreasing = false;
  }
  std::vector<double> lx, ly;
  for (const auto* p : good) {
    if (p->gradient_error > 0.0) {
      lx.push_back(std::log(static_cast<double>(p->M)));
      ly.push_back(std::log(p->gradient_error));
    }
  }
  if (lx.size() >= 2) {
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    if (sxx > 0.0) {
      study.slope = sxy / sxx;
      study.slope_available = true;
    }
  }
  return study;
}

LyapunovModeReport lyapunov_mode_check(const SystemModel& model, const KernelSpec& kernel, const CenterSet& centers,
                                       const Eigen::MatrixXd& check_points, const SolverSettings& settings,
                                       double tol) {
  model.validate();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(model.n);
  if (model.input_map(zero).norm() != 0.0) throw InputError("lyapunov mode: input map must vanish identically");
  const Linearization lin = linearize(model);
  Eigen::EigenSolver<Eigen::MatrixXd> es(lin.A);
  if (es.eigenvalues().real().maxCoeff() >= 0.0) {
    throw InputError("lyapunov mode: A is not Hurwitz; the equilibrium must be asymptotically stable");
  }
  LyapunovModeReport r;
  const RiccatiSolution are = solve_are(lin, model.control_weight);
  r.P = are.P;
  r.lyapunov_residual = (lin.A.transpose() * r.P + r.P * lin.A + lin.Q).norm();
  const SynthesisProblem prob = assemble(model, kernel, centers, CollocationGrid::same_as(centers), r.P);
  const SynthesisOutcome out = synthesize(prob, settings);
  r.hessian_error = out.equilibrium.hessian;
  r.min_orbital = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < check_points.cols(); ++j) {
    const Eigen::VectorXd x = check_points.col(j);
    r.min_orbital = std::min(r.min_orbital, out.vf.gradient(x).dot(model.drift(x)) + model.state_cost(x));
  }
  r.ok = r.lyapunov_residual < 1e-8 && r.hessian_error <= tol && r.min_orbital >= -tol;
  return r;
}

namespace {

nlohmann::json scan_json(const ResidualScan& s) {
  return {{"min", s.min}, {"max", s.max}, {"eps_hat", s.eps_hat}, {"min_lmi_eigenvalue", s.min_lmi},
          {"points", s.points}};
}

}  // namespace

nlohmann::json VerificationReport::to_json() const {
  nlohmann::json j;
  j["system"] = system;
  j["equilibrium"] = {{"value_residual", equilibrium.value},
                      {"gradient_residual", equilibrium.gradient},
                      {"hessian_residual", equilibrium.hessian}};
  j["residual"] = {{"collocation", scan_json(collocation)}, {"off_grid", scan_json(off_grid)},
                   {"eps_hat", collocation.eps_hat}};
  j["lmi"] = {{"min_eigenvalue_collocation", collocation.min_lmi}, {"min_eigenvalue_off_grid", off_grid.min_lmi}};
  if (comparison) {
    const auto& c = *comparison;
    j["comparison"] = {{"max_value_error", c.max_value_error},
                       {"mean_value_error", c.mean_value_error},
                       {"max_gradient_error", c.max_gradient_error},
                       {"mean_gradient_error", c.mean_gradient_error},
                       {"max_control_error", c.max_control_error},
                       {"mean_control_error", c.mean_control_error},
                       {"dominates_on_boundary", c.dominates_on_boundary},
                       {"min_boundary_gap", c.min_boundary_gap}};
  } else {
    j["comparison"] = "not_applicable";
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : suboptimality) {
    nlohmann::json row = {{"label", r.label},       {"settling_time", r.settling_time}, {"settled", r.settled},
                          {"eps_hat", collocation.eps_hat}, {"bound", r.bound},    {"cost", r.cost}};
    if (r.exact_value) row["exact_value"] = *r.exact_value;
    if (r.gap) row["cost_minus_exact"] = *r.gap;
    rows.push_back(row);
  }
  j["suboptimality"] = {{"settling_threshold", kSettlingThreshold}, {"rows", rows}};
  if (stability) j["stability"] = {{"alpha", stability->alpha}, {"beta", stability->beta}};
  if (decrease) j["lyapunov_decrease"] = {{"max_increase", decrease->max_increase}, {"violations", decrease->violations}};
  return j;
}

std::string VerificationReport::to_text() const {
  std::ostringstream os;
  os << std::setprecision(4) << std::scientific;
  os << "Verification report: " << system << "\n";
  os << "  equilibrium: |V(0)| = " << equilibrium.value << ", |grad V(0)| = " << equilibrium.gradient
     << ", |Hess V(0) - P|_F = " << equilibrium.hessian << "\n";
  os << "  HJB residual at " << collocation.points << " collocation points: min " << collocation.min << ", max "
     << collocation.max << ", eps_hat " << collocation.eps_hat << "\n";
  os << "  HJB residual on " << off_grid.points << " off-grid points: min " << off_grid.min << ", max " << off_grid.max
     << ", eps_hat " << off_grid.eps_hat << "\n";
  os << "  LMI min eigenvalue: collocation " << collocation.min_lmi << ", off-grid " << off_grid.min_lmi << "\n";
  if (comparison) {
    os << "  exact comparison: max |V - V*| " << comparison->max_value_error << " (mean " << comparison->mean_value_error
       << "), max |grad V - grad V*| " << comparison->max_gradient_error << " (mean "
       << comparison->mean_gradient_error << "), V >= V* on boundary: "
       << (comparison->dominates_on_boundary ? "yes" : "no") << "\n";
  }
  for (const auto& r : suboptimality) {
    os << "  " << r.label << ": T_hat " << r.settling_time << (r.settled ? "" : " (not settled)") << ", bound "
       << r.bound << ", J " << r.cost;
    if (r.gap) os << ", J - V* " << *r.gap;
    os << "\n";
  }
  if (stability) os << "  decay fit: alpha " << stability->alpha << ", beta " << stability->beta << "\n";
  if (decrease) {
    os << "  V along trajectories: max increase " << decrease->max_increase << ", violations " << decrease->violations
       << "\n";
  }
  return os.str();
}

}  // namespace hjbk

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hjbk/conic.hpp"
#include "hjbk/kernel.hpp"
#include "hjbk/simulate.hpp"
#include "hjbk/synthesis.hpp"
#include "hjbk/system.hpp"

namespace hjbk {

/// R(x) = grad V^T f - 1/2 grad V^T g D^-1 g^T grad V + q.
double hjb_residual(const ValueFunction& vf, const SystemModel& model, const Eigen::VectorXd& x);

/// Smallest eigenvalue of [[2 (grad V^T f + q), grad V^T g], [g^T grad V, D]].
double lmi_margin(const ValueFunction& vf, const SystemModel& model, const Eigen::VectorXd& x);

EquilibriumResiduals equilibrium_check(const ValueFunction& vf, const Eigen::MatrixXd& P_target);

/// Tensor grid with `per_axis` points per axis over the box (columns are points).
Eigen::MatrixXd dense_grid(const Box& box, int per_axis);

struct ResidualScan {
  double min = 0.0;
  double max = 0.0;
  double eps_hat = 0.0;  // max(0, -min)
  double min_lmi = 0.0;
  int points = 0;
};

ResidualScan residual_scan(const ValueFunction& vf, const SystemModel& model, const Eigen::MatrixXd& points);

struct SuboptimalityRow {
  std::string label;
  double settling_time = 0.0;  // first t with |x| <= 1e-3, or the horizon
  bool settled = false;
  double bound = 0.0;          // eps_hat * settling_time
  double cost = 0.0;           // J(x0; u_hat) over the horizon
  std::optional<double> exact_value;
  std::optional<double> gap;   // J - V*(x0)
};

constexpr double kSettlingThreshold = 1e-3;

std::vector<SuboptimalityRow> suboptimality_estimate(const ValueFunction& vf, const SystemModel& model,
                                                     const SimulationResult& batch, double eps_hat);

struct ExactComparison {
  bool applicable = false;
  double max_value_error = 0.0;
  double mean_value_error = 0.0;
  double max_gradient_error = 0.0;
  double mean_gradient_error = 0.0;
  double max_control_error = 0.0;
  double mean_control_error = 0.0;
  /// V_hat >= V* on the sampled boundary of the domain.
  bool dominates_on_boundary = false;
  double min_boundary_gap = 0.0;
};

ExactComparison compare_exact(const ValueFunction& vf, const SystemModel& model, const Eigen::MatrixXd& points);

/// Largest increase of V between consecutive output samples along the trajectories.
struct LyapunovDecrease {
  double max_increase = 0.0;
  int violations = 0;  // samples where the increase exceeds the tolerance
};

LyapunovDecrease lyapunov_decrease(const SimulationResult& batch, double tol = 1e-6);

struct ConvergencePoint {
  int M = 0;
  bool ok = false;
  std::string failure;
  double fill_distance = 0.0;
  double gradient_error = 0.0;  // root mean square of |grad V* - grad V| over the quadrature grid
};

struct ConvergenceStudy {
  std::vector<ConvergencePoint> points;
  double slope = 0.0;  // d log(error) / d log(M) over successful points
  bool slope_available = false;
  bool nonincreasing = false;  // up to `noise`
  double noise = 0.0;
};

/// Synthesizes on a uniform grid of M centers (M^(1/n) per axis) for every M and measures the
/// gradient error against the exact solution. Centers double as collocation points.
ConvergenceStudy convergence_study(const SystemModel& model, const KernelSpec& kernel, const std::vector<int>& Ms,
                                   const Eigen::MatrixXd& P_target, const Eigen::MatrixXd& quadrature,
                                   const SolverSettings& settings = {}, const SynthesisOptions& options = {},
                                   double noise = 1e-6);

struct LyapunovModeReport {
  Eigen::MatrixXd P;
  double lyapunov_residual = 0.0;  // |A^T P + P A + Q|_F
  double hessian_error = 0.0;      // |Hess V(0) - P|_F
  double min_orbital = 0.0;        // min over the grid of grad V^T f + q
  bool ok = false;
};

/// Runs the pipeline on an uncontrolled model (g == 0). Throws InputError when g is not
/// identically zero at the origin or A is not Hurwitz.
LyapunovModeReport lyapunov_mode_check(const SystemModel& model, const KernelSpec& kernel, const CenterSet& centers,
                                       const Eigen::MatrixXd& check_points, const SolverSettings& settings = {},
                                       double tol = 1e-4);

struct VerificationReport {
  std::string system;
  EquilibriumResiduals equilibrium;
  ResidualScan collocation;  // at the collocation points
  ResidualScan off_grid;     // on the denser evaluation mesh
  std::optional<ExactComparison> comparison;
  std::vector<SuboptimalityRow> suboptimality;
  std::optional<DecayFit> stability;
  std::optional<LyapunovDecrease> decrease;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

}  // namespace hjbk

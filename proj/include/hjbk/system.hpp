#pragma once

#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>

namespace hjbk {

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using MatrixField = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
using ScalarField = std::function<double(const Eigen::VectorXd&)>;

/// Axis-aligned box.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Box cube(int n, double half_width);
  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Eigen::VectorXd& x, double tol = 1e-12) const;
};

/// Known optimal pair for benchmark problems.
struct ExactSolution {
  ScalarField value;
  VectorField gradient;
  VectorField control;
  /// False once the state cost has been replaced: V* is then only a reference curve.
  bool optimal_for_cost = true;
};

/// Control-affine system  xdot = f(x) + g(x) u  with running cost q(x) + 1/2 u^T D u.
struct SystemModel {
  std::string name;
  int n = 0;
  int m = 0;
  VectorField drift;
  MatrixField input_map;
  ScalarField state_cost;
  Eigen::MatrixXd control_weight;
  Box domain;

  MatrixField drift_jacobian;       // optional analytic df/dx
  MatrixField state_cost_hessian;   // optional analytic Hess q
  std::optional<ExactSolution> exact;

  /// Hard invariants: dimensions, f(0) = 0, q(0) = 0, D symmetric positive definite.
  void validate() const;
};

/// Sampled check of the standing assumptions that are not enforced by validate().
struct AssumptionReport {
  double equilibrium_residual = 0.0;  // |f(0)|
  double cost_at_origin = 0.0;        // q(0)
  double min_sampled_cost = 0.0;      // min q over nonzero samples
  bool cost_positive_on_samples = false;
  double min_control_weight_eig = 0.0;
};

AssumptionReport check_assumptions(const SystemModel& model, unsigned seed = 7, int samples = 100);

struct Linearization {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd Q;
  bool finite_difference = false;
};

struct LinearizeOptions {
  bool use_analytic = true;
  double jacobian_step = 1e-6;
  double hessian_step = 1e-4;
};

/// A = df/dx(0), B = g(0), Q = Hess q(0). Analytic derivatives when the model carries them
/// (and use_analytic is set), otherwise central differences; the Hessian uses one Richardson
/// extrapolation step. Throws NumericalError when the numerical Hessian is not symmetric.
Linearization linearize(const SystemModel& model, const LinearizeOptions& options = {});

/// grad V^T f - 1/2 grad V^T g D^-1 g^T grad V + q evaluated at x.
double hjb_expression(const SystemModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& grad_v);

/// xdot = x + x^3, g = 1, D = 1, V* = x^2 + x^4/4, q = 1/2 V*'^2 - V*' f on [-1.5, 1.5].
SystemModel builtin_1d();
/// xdot = x (1 + |x|^2) + u, V* = |x|^2 + |x|^4/4, q from the same recipe, on [-1.5, 1.5]^2.
SystemModel builtin_2d();
/// Van der Pol with actuated second state, q = x^T Q x, D = R, on [-2, 2]^2.
SystemModel builtin_vdp(double mu, const Eigen::Matrix2d& state_weight = 2.0 * Eigen::Matrix2d::Identity(),
                        double control_weight = 1.0);

/// "poly1d" | "radial2d" | "vanderpol".
SystemModel builtin_by_name(const std::string& name, double mu = 1.0);

/// Copy of the model with q(x) = 1/2 x^T Q x. Any exact solution is kept as a reference only.
SystemModel with_quadratic_state_cost(const SystemModel& model, const Eigen::MatrixXd& Q);

/// Uncontrolled system (g == 0, m = 1) for Lyapunov-mode runs.
SystemModel uncontrolled_system(std::string name, int n, VectorField drift, MatrixField jacobian,
                                ScalarField cost, MatrixField cost_hessian, Box domain);

}  // namespace hjbk

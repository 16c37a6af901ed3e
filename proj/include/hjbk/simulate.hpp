#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hjbk/system.hpp"

namespace hjbk {

using Feedback = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Batch of initial conditions: an explicit list, `count` points evenly spaced on the segment
/// from..to (endpoints included), or `count` points r (cos th_k, sin th_k), th_k = 2 pi k / count.
struct InitialConditions {
  enum class Kind { Explicit, Span, Circle };
  Kind kind = Kind::Explicit;
  std::vector<Eigen::VectorXd> points;
  Eigen::VectorXd from;
  Eigen::VectorXd to;
  double radius = 1.0;
  int count = 0;

  static InitialConditions explicit_list(std::vector<Eigen::VectorXd> pts);
  static InitialConditions span(Eigen::VectorXd from, Eigen::VectorXd to, int count);
  static InitialConditions circle(double radius, int count);

  /// Expanded list of states; throws InputError if empty or of the wrong dimension.
  std::vector<Eigen::VectorXd> expand(int n) const;
  /// Row labels: "x0=..." for lists, "theta=..." (degrees) for circles.
  std::vector<std::string> labels(int n) const;
};

struct SimulationConfig {
  enum class Stepper { RungeKutta4, DormandPrince };
  double horizon = 10.0;
  Stepper stepper = Stepper::RungeKutta4;
  /// Upper bound on the fixed step; the step is shrunk so that output times are hit exactly.
  double step = 1e-3;
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  int output_samples = 1000;
  double blowup_norm = 1e6;
  InitialConditions initial;

  void validate() const;
};

struct Trajectory {
  std::string label;
  Eigen::VectorXd x0;
  Eigen::VectorXd t;        // output grid, N samples
  Eigen::MatrixXd x;        // N x n
  Eigen::MatrixXd u;        // N x m
  Eigen::VectorXd cost;     // cumulative running cost at each output time
  Eigen::VectorXd norm;     // |x(t_k)|
  Eigen::VectorXd value;    // V(x(t_k)) when a value function was supplied, else empty
  double final_norm = 0.0;
  bool left_domain = false;
  double left_domain_time = 0.0;
  int steps = 0;
};

/// log |x(t)| ~ log(alpha |x0|) - beta t.
struct DecayFit {
  double alpha = 0.0;
  double beta = 0.0;
  int points = 0;
  bool from_tail = true;  // false when the tail window had too few samples and all samples were used
};

struct SimulationResult {
  std::vector<Trajectory> trajectories;
  std::vector<DecayFit> fits;
  double max_final_norm = 0.0;
  double mean_final_norm = 0.0;
  /// Batch constants: largest alpha and smallest beta over the trajectories.
  DecayFit decay;
};

/// Closed-loop integration of xdot = f(x) + g(x) k(x). Throws SimulationError when the state
/// norm exceeds config.blowup_norm or becomes non-finite.
Trajectory integrate(const SystemModel& model, const Feedback& feedback, const Eigen::VectorXd& x0,
                     const SimulationConfig& config, const ScalarField& value = nullptr);

/// Integrates every initial condition. Throws SimulationError listing all failing initial
/// conditions if any trajectory blows up.
SimulationResult run_batch(const SystemModel& model, const Feedback& feedback, const SimulationConfig& config,
                           const ScalarField& value = nullptr);

/// Trapezoidal quadrature of q(x) + 1/2 u^T D u over the recorded samples.
double cost_of_trajectory(const SystemModel& model, const Trajectory& traj);

/// Least-squares fit over t in [T/2, T] restricted to |x| > 1e-12.
DecayFit fit_decay(const Trajectory& traj);

/// CSV with columns traj, t, x_1..x_n, u_1..u_m, norm, V.
std::string trajectories_csv(const SimulationResult& result);
nlohmann::json batch_summary(const SimulationResult& result);

}  // namespace hjbk

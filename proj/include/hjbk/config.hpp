#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hjbk/conic.hpp"
#include "hjbk/kernel.hpp"
#include "hjbk/simulate.hpp"

namespace hjbk {

/// Point-set descriptor used for centers and collocation points.
struct PointSetConfig {
  enum class Kind { Grid, Explicit, SameAsCenters };
  Kind kind = Kind::Grid;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<int> counts;
  std::vector<std::vector<double>> points;

  bool operator==(const PointSetConfig&) const = default;
};

/// Acceptance gates checked by `reproduce`. Unset optionals are not checked.
struct GateConfig {
  double equilibrium = 1e-6;              // |V(0)| and |grad V(0)|
  double hessian_residual = 1e-4;         // |Hess V(0) - P|_F
  double min_collocation_eigenvalue = -1e-6;
  std::optional<double> max_final_norm;
  std::optional<double> mean_final_norm;
  bool require_decay = true;              // fitted beta > 0
  double soft_time_s = 120.0;             // reported only

  bool operator==(const GateConfig&) const = default;
};

struct InitialConditionConfig {
  std::string type = "explicit";  // explicit | span | circle
  std::vector<std::vector<double>> points;
  std::vector<double> from;
  std::vector<double> to;
  double radius = 1.0;
  int count = 0;

  bool operator==(const InitialConditionConfig&) const = default;
  InitialConditions build() const;
};

struct ConvergenceConfig {
  std::vector<int> M;
  int quadrature_per_axis = 201;
  double solver_tolerance = 1e-8;
  double noise = 1e-6;

  bool operator==(const ConvergenceConfig&) const = default;
};

struct ExperimentConfig {
  std::string name;
  std::string system = "poly1d";
  double mu = 1.0;
  /// "model": the system's own q. "quadratic": q = 1/2 x^T Q x (requires Q).
  std::string state_cost = "model";
  /// Replaces Hess q(0) in the Riccati equation. For vanderpol it is also the state weight.
  std::optional<std::vector<std::vector<double>>> Q;
  /// Control weight (alias "R" on input).
  std::optional<std::vector<std::vector<double>>> D;
  KernelSpec kernel;
  PointSetConfig centers;
  PointSetConfig collocation{PointSetConfig::Kind::SameAsCenters, {}, {}, {}, {}};
  double hessian_relaxation = 0.0;
  bool precondition_blocks = false;
  double solver_tolerance = 1e-4;
  int solver_max_iterations = 50000;
  double sim_horizon = 10.0;
  std::string sim_stepper = "rk4";
  double sim_step = 1e-3;
  double sim_rel_tol = 1e-8;
  int sim_output_samples = 1000;
  InitialConditionConfig initial_conditions;
  int off_grid_per_axis = 100;
  int comparison_per_axis = 200;
  ConvergenceConfig convergence;
  GateConfig gates;
  std::string output_dir = "out";
  unsigned seed = 7;

  bool operator==(const ExperimentConfig&) const = default;

  /// State dimension implied by the system name.
  int dim() const;
};

/// Strict parse: unknown fields, wrong types and missing required fields raise InputError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
/// Canonical form with every field present; parse(serialize(c)) == c.
nlohmann::json serialize_config(const ExperimentConfig& c);

/// Named experiments: poly1d, radial2d, vanderpol, poly1d_exact, radial2d_exact.
ExperimentConfig builtin_experiment(const std::string& name);
std::vector<std::string> builtin_experiment_names();

SolverSettings solver_settings(const ExperimentConfig& c);
SimulationConfig simulation_config(const ExperimentConfig& c);

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows);

}  // namespace hjbk

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hjbk/conic.hpp"
#include "hjbk/kernel.hpp"
#include "hjbk/system.hpp"

namespace hjbk {

/// Points where the HJB inequality is enforced, stored column-wise (n x N).
struct CollocationGrid {
  Eigen::MatrixXd points;
  std::string descriptor = "explicit";

  int size() const { return static_cast<int>(points.cols()); }
  Eigen::VectorXd point(int j) const { return points.col(j); }

  static CollocationGrid same_as(const CenterSet& centers);
  static CollocationGrid uniform_grid(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                      const std::vector<int>& counts);
};

struct SynthesisOptions {
  /// 0 imposes Hess V(0) = P exactly; > 0 imposes |Hess V(0)_lk - P_lk| <= eps entrywise.
  double hessian_relaxation = 0.0;
  /// Dropping the Hessian condition admits the trivial solution p = 0.
  bool enforce_hessian = true;
  /// Congruence diag(sqrt(a), I) M diag(sqrt(a), I) with a = 1 / max(1, |2 q(x_j)|).
  bool precondition_blocks = false;
};

/// Data at one collocation point x_j, everything the LMI block needs as a function of p.
struct CollocationData {
  Eigen::VectorXd x;
  Eigen::VectorXd drift_row;   // M: grad_x k(x_j, c_i)^T f(x_j)
  Eigen::MatrixXd input_rows;  // M x m: grad_x k(x_j, c_i)^T g(x_j)
  double q = 0.0;
};

struct SynthesisProblem {
  SystemModel model;
  KernelSpec kernel;
  CenterSet centers;
  CollocationGrid grid;
  Eigen::MatrixXd P_target;
  SynthesisOptions options;

  std::vector<CollocationData> points;
  FeatureRows origin;
  std::vector<std::string> warnings;

  int num_coefficients() const { return centers.size(); }
  /// 1 + n, plus n(n+1)/2 when the Hessian condition is an equality.
  int equality_rows() const;
  /// Two per upper-triangle Hessian entry when relaxed, else 0.
  int inequality_rows() const;
};

/// Precomputes all per-point data. Throws InputError for points outside the model domain or
/// mismatched dimensions; warns (problem.warnings) when M is below the equality row count.
SynthesisProblem assemble(const SystemModel& model, const KernelSpec& kernel, const CenterSet& centers,
                          const CollocationGrid& grid, const Eigen::MatrixXd& P_target,
                          const SynthesisOptions& options = {});

/// [[2 (p^T df_j + q_j), p^T dg_j], [dg_j^T p, D]] (preconditioned when enabled).
Eigen::MatrixXd lmi_block(const SynthesisProblem& problem, int j, const Eigen::VectorXd& p);

/// Variables are the coefficients p themselves.
ConicProgram to_conic(const SynthesisProblem& problem);

/// V(x) = sum_i p_i k(x, c_i) with feedback u = -D^-1 g(x)^T grad V(x).
class ValueFunction {
 public:
  ValueFunction() = default;
  ValueFunction(Eigen::VectorXd p, KernelSpec kernel, CenterSet centers, const SystemModel& model,
                Eigen::MatrixXd P_target);

  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const;
  Eigen::VectorXd control(const Eigen::VectorXd& x) const;

  const Eigen::VectorXd& coefficients() const { return p_; }
  const KernelSpec& kernel() const { return kernel_; }
  const CenterSet& centers() const { return centers_; }
  const Eigen::MatrixXd& control_weight() const { return D_; }
  const Eigen::MatrixXd& P_target() const { return P_target_; }
  const std::string& system_name() const { return system_; }
  int dim() const { return kernel_.dim; }

  nlohmann::json to_json() const;
  /// Rebinds the feedback to the model's input map. Throws InputError on dimension mismatch.
  static ValueFunction from_json(const nlohmann::json& j, const SystemModel& model);

 private:
  Eigen::VectorXd p_;
  KernelSpec kernel_;
  CenterSet centers_;
  Eigen::MatrixXd D_;
  MatrixField input_map_;
  Eigen::MatrixXd P_target_;
  std::string system_;
};

/// |V(0)|, |grad V(0)| and |Hess V(0) - P|_F.
struct EquilibriumResiduals {
  double value = 0.0;
  double gradient = 0.0;
  double hessian = 0.0;
};

EquilibriumResiduals equilibrium_residuals(const ValueFunction& vf, const Eigen::MatrixXd& P_target);

/// Builds the value function and checks the equilibrium conditions: |V(0)| < 1e-6,
/// |grad V(0)| < 1e-6 and, when the Hessian condition is active, |Hess V(0) - P|_F <= n eps_H + 1e-4.
/// Throws SynthesisError when a check fails.
ValueFunction extract(const Eigen::VectorXd& p, const SynthesisProblem& problem);

struct SynthesisOutcome {
  ValueFunction vf;
  SolverStats stats;
  EquilibriumResiduals equilibrium;
  /// Smallest eigenvalue of M_j(p*) over the collocation points.
  double min_collocation_eigenvalue = 0.0;
};

/// to_conic, solve_conic and extract in one call.
SynthesisOutcome synthesize(const SynthesisProblem& problem, const SolverSettings& settings = {});

}  // namespace hjbk

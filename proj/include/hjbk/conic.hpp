#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hjbk/errors.hpp"

namespace hjbk {

/// Affine symmetric matrix map  F(p) = constant + sum_i p_i coeffs[i].
struct PsdBlock {
  Eigen::MatrixXd constant;
  std::vector<Eigen::MatrixXd> coeffs;

  int size() const { return static_cast<int>(constant.rows()); }
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& p) const;
};

/// minimize |p|^2
/// subject to  eq_matrix p = eq_rhs,
///             ineq_lower <= ineq_matrix p <= ineq_upper,
///             blocks[j](p) PSD.
/// Solver variables are p itself (identity map).
struct ConicProgram {
  int num_vars = 0;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd ineq_matrix;
  Eigen::VectorXd ineq_lower;
  Eigen::VectorXd ineq_upper;
  std::vector<PsdBlock> blocks;

  /// Structural checks: shapes agree and every coefficient matrix is exactly symmetric.
  void validate() const;
};

/// Debug dump: dense equality/inequality rows, PSD matrices packed row-wise by upper triangle.
nlohmann::json conic_to_json(const ConicProgram& program);

struct SolverSettings {
  /// Relative barrier duality-gap target.
  double tolerance = 1e-4;
  /// Cap on the total number of Newton steps (both phases).
  int max_iterations = 50000;
  /// Threshold on the Phase I optimum above which the program is declared infeasible.
  double feasibility_tolerance = 1e-7;
  /// Rank threshold for dropping dependent equality rows, relative to the largest singular value.
  double rank_tolerance = 1e-10;
};

enum class SolveStatus { Optimal, Infeasible, MaxIterations };

std::string to_string(SolveStatus status);

struct SolverStats {
  SolveStatus status = SolveStatus::Optimal;
  int iterations = 0;
  int phase1_iterations = 0;
  double primal_residual = 0.0;  // max of equality residual, inequality violation, -min block eigenvalue
  double duality_gap = 0.0;
  double min_block_eigenvalue = 0.0;
  double objective = 0.0;
  double wall_time_s = 0.0;
  int dropped_equality_rows = 0;
  int constant_blocks = 0;
  /// Interior was empty; the blocks were shifted by this amount before Phase II.
  double interior_shift = 0.0;
  std::vector<std::string> warnings;
};

struct SolveResult {
  Eigen::VectorXd p;
  SolverStats stats;
};

/// Constraint violations of p for a program.
struct FeasibilityReport {
  double max_equality_violation = 0.0;
  double max_inequality_violation = 0.0;
  double min_block_eigenvalue = 0.0;
  int worst_block = -1;

  bool feasible(double tol) const {
    return max_equality_violation <= tol && max_inequality_violation <= tol && min_block_eigenvalue >= -tol;
  }
};

FeasibilityReport check_feasibility(const ConicProgram& program, const Eigen::VectorXd& p);

/// Raised when Phase I proves that no feasible point exists (to feasibility_tolerance).
class InfeasibleError : public SynthesisError {
 public:
  struct Violation {
    int block = -1;
    double min_eigenvalue = 0.0;
  };

  InfeasibleError(const std::string& what, double phase1_optimum, std::vector<Violation> violations,
                  SolverStats stats)
      : SynthesisError(what), phase1_optimum_(phase1_optimum), violations_(std::move(violations)),
        stats_(std::move(stats)) {}

  /// Smallest uniform shift s such that every block plus s I is PSD on the equality subspace.
  double phase1_optimum() const { return phase1_optimum_; }
  /// Blocks that remain indefinite at the Phase I optimum, most violated first.
  const std::vector<Violation>& violations() const { return violations_; }
  const SolverStats& stats() const { return stats_; }

 private:
  double phase1_optimum_;
  std::vector<Violation> violations_;
  SolverStats stats_;
};

/// Primal log-barrier interior-point method.
///
/// Equalities are eliminated through an orthonormal null-space basis (p = p0 + Z z), so they
/// hold to rounding error. Blocks that do not depend on z are checked once and dropped.
/// Phase I minimizes a uniform shift s with F_j(z) + s I > 0 until a strictly feasible point
/// is found; Phase II follows the central path of |p|^2 with Newton centering.
///
/// Throws InfeasibleError when the program is infeasible and NumericalError when the
/// iteration budget runs out before a feasible point is found.
SolveResult solve_conic(const ConicProgram& program, const SolverSettings& settings = {});

}  // namespace hjbk

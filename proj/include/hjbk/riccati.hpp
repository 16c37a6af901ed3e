#pragma once

#include <string>

#include <Eigen/Dense>

#include "hjbk/system.hpp"

namespace hjbk {

enum class RiccatiMethod { ScalarClosedForm, HamiltonianSubspace };

std::string to_string(RiccatiMethod method);

struct RiccatiSolution {
  Eigen::MatrixXd P;
  double residual_norm = 0.0;
  RiccatiMethod method = RiccatiMethod::HamiltonianSubspace;
};

/// Stabilizing solution of A^T P + P A - P B D^-1 B^T P + Q = 0.
///
/// n = 1 uses the closed form (or the scalar Lyapunov solution when B = 0). Otherwise the
/// stable invariant subspace of [[A, -B D^-1 B^T], [-Q, -A^T]] is computed from an
/// eigendecomposition, complex pairs are split into real and imaginary parts, and
/// P = X2 X1^-1 is symmetrized and rechecked.
///
/// Throws SynthesisError when no n-dimensional stable subspace exists, when P is not
/// positive definite, or when the residual recheck fails.
RiccatiSolution solve_are(const Linearization& lin, const Eigen::MatrixXd& D);

/// Positive root of 2 A P - P^2 B^2 / D + Q = 0. Throws InputError for B = 0.
double scalar_closed_form(double A, double B, double D, double Q);

/// Frobenius norm of A^T P + P A - P B D^-1 B^T P + Q.
double are_residual(const Eigen::MatrixXd& P, const Linearization& lin, const Eigen::MatrixXd& D);

/// Solves A^T X + X A + C = 0 by Kronecker vectorization (small n only).
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C);

}  // namespace hjbk

#include "hjbk/riccati.hpp"

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hjbk/errors.hpp"

namespace hjbk {

std::string to_string(RiccatiMethod method) {
  return method == RiccatiMethod::ScalarClosedForm ? "scalar_closed_form" : "hamiltonian_subspace";
}

double scalar_closed_form(double A, double B, double D, double Q) {
  if (B == 0.0) throw InputError("scalar_closed_form: B = 0, use the Lyapunov solution");
  if (!(D > 0.0)) throw InputError("scalar_closed_form: D must be > 0");
  const double a = A * D / (B * B);
  return a + std::sqrt(a * a + Q * D / (B * B));
}

double are_residual(const Eigen::MatrixXd& P, const Linearization& lin, const Eigen::MatrixXd& D) {
  const Eigen::MatrixXd S = lin.B * D.ldlt().solve(lin.B.transpose());
  return (lin.A.transpose() * P + P * lin.A - P * S * P + lin.Q).norm();
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C) {
  const auto n = A.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  // vec(A^T X + X A) = (I kron A^T + A^T kron I) vec(X), column-major vec.
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      K.block(i * n, j * n, n, n) += I(i, j) * A.transpose();
      K.block(i * n, j * n, n, n) += A(j, i) * I;
    }
  const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(C.data(), n * n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible()) throw SynthesisError("Lyapunov operator is singular");
  const Eigen::VectorXd x = lu.solve(rhs);
  return Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n);
}

namespace {

void check_inputs(const Linearization& lin, const Eigen::MatrixXd& D) {
  const auto n = lin.A.rows();
  if (lin.A.cols() != n || lin.Q.rows() != n || lin.Q.cols() != n || lin.B.rows() != n) {
    throw InputError("solve_are: inconsistent A, B, Q dimensions");
  }
  if (D.rows() != lin.B.cols() || D.cols() != lin.B.cols()) throw InputError("solve_are: D must be m x m");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> d_eig(0.5 * (D + D.transpose()));
  if (!(d_eig.eigenvalues().minCoeff() > 0.0)) throw InputError("solve_are: D must be positive definite");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> q_eig(0.5 * (lin.Q + lin.Q.transpose()));
  if (q_eig.eigenvalues().minCoeff() < -1e-8) throw InputError("solve_are: Q must be positive semidefinite");
}

Eigen::MatrixXd hamiltonian_solution(const Eigen::MatrixXd& A, const Eigen::MatrixXd& S, const Eigen::MatrixXd& Q) {
  const auto n = A.rows();
  Eigen::MatrixXd H(2 * n, 2 * n);
  H << A, -S, -Q, -A.transpose();
  Eigen::EigenSolver<Eigen::MatrixXd> es(H);
  if (es.info() != Eigen::Success) throw SynthesisError("solve_are: Hamiltonian eigendecomposition failed");

  const double scale = std::max(1.0, H.norm());
  std::vector<Eigen::VectorXd> basis;
  for (Eigen::Index k = 0; k < 2 * n; ++k) {
    const std::complex<double> lambda = es.eigenvalues()[k];
    if (std::abs(lambda.real()) <= 1e-10 * scale) {
      throw SynthesisError("solve_are: Hamiltonian has eigenvalues on the imaginary axis "
                           "(system not stabilizable or not detectable)");
    }
    if (lambda.real() >= 0.0) continue;
    const Eigen::VectorXcd v = es.eigenvectors().col(k);
    if (std::abs(lambda.imag()) <= 1e-12 * scale) {
      basis.push_back(v.real().normalized());
    } else if (lambda.imag() > 0.0) {
      // The conjugate partner spans the same real plane.
      basis.push_back(v.real().normalized());
      basis.push_back(v.imag().normalized());
    }
  }
  if (static_cast<Eigen::Index>(basis.size()) != n) {
    throw SynthesisError("solve_are: stable invariant subspace has dimension " + std::to_string(basis.size()) +
                         ", expected " + std::to_string(n));
  }
  Eigen::MatrixXd X(2 * n, n);
  for (Eigen::Index k = 0; k < n; ++k) X.col(k) = basis[static_cast<std::size_t>(k)];
  const Eigen::MatrixXd X1 = X.topRows(n);
  const Eigen::MatrixXd X2 = X.bottomRows(n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(X1.transpose());
  if (!lu.isInvertible()) throw SynthesisError("solve_are: stable subspace basis is not invertible");
  // P = X2 X1^-1  <=>  X1^T P^T = X2^T
  const Eigen::MatrixXd P = lu.solve(X2.transpose()).transpose();
  return 0.5 * (P + P.transpose());
}

}  // namespace

RiccatiSolution solve_are(const Linearization& lin, const Eigen::MatrixXd& D) {
  check_inputs(lin, D);
  const auto n = lin.A.rows();
  const Eigen::MatrixXd S = lin.B * D.ldlt().solve(lin.B.transpose());

  RiccatiSolution sol;
  if (n == 1) {
    sol.method = RiccatiMethod::ScalarClosedForm;
    const double a = lin.A(0, 0), s = S(0, 0), q = lin.Q(0, 0);
    double p = 0.0;
    if (s > 0.0) {
      // Same root as scalar_closed_form with B^2/D replaced by B D^-1 B^T.
      p = a / s + std::sqrt((a / s) * (a / s) + q / s);
    } else {
      if (!(a < 0.0)) throw SynthesisError("solve_are: B = 0 and A is not stable; no Lyapunov solution");
      p = -q / (2.0 * a);
    }
    sol.P = Eigen::MatrixXd::Constant(1, 1, p);
  } else {
    sol.method = RiccatiMethod::HamiltonianSubspace;
    sol.P = hamiltonian_solution(lin.A, S, lin.Q);
    // Newton-Kleinman polish, accepted only when it lowers the residual.
    for (int it = 0; it < 2; ++it) {
      const double r0 = are_residual(sol.P, lin, D);
      if (r0 <= 1e-14 * (1.0 + sol.P.norm())) break;
      const Eigen::MatrixXd Acl = lin.A - S * sol.P;
      Eigen::MatrixXd next;
      try {
        next = solve_lyapunov(Acl, lin.Q + sol.P * S * sol.P);
      } catch (const SynthesisError&) {
        break;
      }
      next = 0.5 * (next + next.transpose());
      if (are_residual(next, lin, D) < r0) sol.P = next; else break;
    }
  }

  sol.residual_norm = are_residual(sol.P, lin, D);
  if (!std::isfinite(sol.residual_norm) || sol.residual_norm >= 1e-8 * (1.0 + sol.P.norm())) {
    throw SynthesisError("solve_are: residual recheck failed (" + std::to_string(sol.residual_norm) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> p_eig(sol.P);
  if (!(p_eig.eigenvalues().minCoeff() > 0.0)) {
    throw SynthesisError("solve_are: solution is not positive definite");
  }
  const Eigen::MatrixXd Acl = lin.A - S * sol.P;
  Eigen::EigenSolver<Eigen::MatrixXd> cl(Acl);
  if (cl.eigenvalues().real().maxCoeff() >= 0.0) {
    throw SynthesisError("solve_are: closed loop A - B D^-1 B^T P is not Hurwitz");
  }
  return sol;
}

}  // namespace hjbk

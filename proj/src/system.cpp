#include "hjbk/system.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "hjbk/errors.hpp"

namespace hjbk {

Box Box::cube(int n, double half_width) {
  return Box{Eigen::VectorXd::Constant(n, -half_width), Eigen::VectorXd::Constant(n, half_width)};
}

bool Box::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
  }
  return true;
}

void SystemModel::validate() const {
  if (n < 1 || m < 1) throw InputError(name + ": state and input dimensions must be positive");
  if (!drift || !input_map || !state_cost) throw InputError(name + ": f, g and q are required");
  if (domain.dim() != n || domain.upper.size() != n) throw InputError(name + ": domain dimension mismatch");
  if (control_weight.rows() != m || control_weight.cols() != m) {
    throw InputError(name + ": control weight must be m x m");
  }
  if ((control_weight - control_weight.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw InputError(name + ": control weight must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(control_weight);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) throw InputError(name + ": control weight must be positive definite");

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd f0 = drift(zero);
  if (f0.size() != n) throw InputError(name + ": f returns the wrong dimension");
  if (f0.norm() >= 1e-12) throw InputError(name + ": origin is not an equilibrium (|f(0)| >= 1e-12)");
  const Eigen::MatrixXd g0 = input_map(zero);
  if (g0.rows() != n || g0.cols() != m) throw InputError(name + ": g returns the wrong shape");
  if (std::abs(state_cost(zero)) >= 1e-12) throw InputError(name + ": q(0) must vanish");
}

AssumptionReport check_assumptions(const SystemModel& model, unsigned seed, int samples) {
  AssumptionReport r;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(model.n);
  r.equilibrium_residual = model.drift(zero).norm();
  r.cost_at_origin = model.state_cost(zero);
  std::mt19937_64 rng(seed);
  r.min_sampled_cost = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd x(model.n);
    for (int i = 0; i < model.n; ++i) {
      std::uniform_real_distribution<double> u(model.domain.lower[i], model.domain.upper[i]);
      x[i] = u(rng);
    }
    if (x.norm() < 1e-9) continue;
    r.min_sampled_cost = std::min(r.min_sampled_cost, model.state_cost(x));
  }
  r.cost_positive_on_samples = r.min_sampled_cost > 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.control_weight);
  r.min_control_weight_eig = eig.eigenvalues().minCoeff();
  return r;
}

namespace {

Eigen::MatrixXd fd_jacobian(const VectorField& f, int n, double h) {
  Eigen::MatrixXd J(n, n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[j] = h;
    J.col(j) = (f(e) - f(-e)) / (2.0 * h);
  }
  return J;
}

Eigen::MatrixXd fd_hessian_at_origin(const ScalarField& q, int n, double h) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const double q0 = q(zero);
  Eigen::MatrixXd H(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd ei = Eigen::VectorXd::Zero(n), ej = Eigen::VectorXd::Zero(n);
      ei[i] = h;
      ej[j] = h;
      if (i == j) {
        H(i, j) = (q(ei) - 2.0 * q0 + q(-ei)) / (h * h);
      } else {
        H(i, j) = (q(ei + ej) - q(ei - ej) - q(-ei + ej) + q(-ei - ej)) / (4.0 * h * h);
      }
    }
  }
  return H;
}

}  // namespace

Linearization linearize(const SystemModel& model, const LinearizeOptions& options) {
  model.validate();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(model.n);
  Linearization lin;
  lin.B = model.input_map(zero);
  const bool analytic = options.use_analytic && model.drift_jacobian && model.state_cost_hessian;
  lin.finite_difference = !analytic;
  if (analytic) {
    lin.A = model.drift_jacobian(zero);
    lin.Q = model.state_cost_hessian(zero);
  } else {
    lin.A = fd_jacobian(model.drift, model.n, options.jacobian_step);
    const double h = options.hessian_step;
    const Eigen::MatrixXd coarse = fd_hessian_at_origin(model.state_cost, model.n, h);
    const Eigen::MatrixXd fine = fd_hessian_at_origin(model.state_cost, model.n, 0.5 * h);
    lin.Q = (4.0 * fine - coarse) / 3.0;
  }
  const double asym = (lin.Q - lin.Q.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-6) {
    throw NumericalError(model.name + ": state-cost Hessian is not symmetric (" + std::to_string(asym) + ")");
  }
  lin.Q = 0.5 * (lin.Q + lin.Q.transpose());
  return lin;
}

double hjb_expression(const SystemModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& grad_v) {
  const Eigen::MatrixXd g = model.input_map(x);
  const Eigen::VectorXd a = g.transpose() * grad_v;
  const double quad = a.dot(model.control_weight.ldlt().solve(a));
  return grad_v.dot(model.drift(x)) - 0.5 * quad + model.state_cost(x);
}

SystemModel builtin_1d() {
  SystemModel s;
  s.name = "poly1d";
  s.n = 1;
  s.m = 1;
  auto f = [](double x) { return x + x * x * x; };
  auto dv = [](double x) { return 2.0 * x + x * x * x; };
  s.drift = [f](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, f(x[0])); };
  s.input_map = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Ones(1, 1); };
  s.state_cost = [f, dv](const Eigen::VectorXd& x) {
    const double w = dv(x[0]);
    return 0.5 * w * w - w * f(x[0]);
  };
  s.control_weight = Eigen::MatrixXd::Ones(1, 1);
  s.domain = Box::cube(1, 1.5);
  s.drift_jacobian = [](const Eigen::VectorXd& x) {
    return Eigen::MatrixXd::Constant(1, 1, 1.0 + 3.0 * x[0] * x[0]);
  };
  // q = -x^4 - x^6 / 2
  s.state_cost_hessian = [](const Eigen::VectorXd& x) {
    const double x2 = x[0] * x[0];
    return Eigen::MatrixXd::Constant(1, 1, -12.0 * x2 - 15.0 * x2 * x2);
  };
  ExactSolution ex;
  ex.value = [](const Eigen::VectorXd& x) {
    const double x2 = x[0] * x[0];
    return x2 + 0.25 * x2 * x2;
  };
  ex.gradient = [dv](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, dv(x[0])); };
  ex.control = [dv](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, -dv(x[0])); };
  s.exact = ex;
  return s;
}

SystemModel builtin_2d() {
  SystemModel s;
  s.name = "radial2d";
  s.n = 2;
  s.m = 2;
  auto grad_v = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x * (2.0 + x.squaredNorm()); };
  s.drift = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x * (1.0 + x.squaredNorm()); };
  s.input_map = [](const Eigen::VectorXd&) -> Eigen::MatrixXd { return Eigen::MatrixXd::Identity(2, 2); };
  s.state_cost = [grad_v](const Eigen::VectorXd& x) {
    const Eigen::VectorXd w = grad_v(x);
    const Eigen::VectorXd f = x * (1.0 + x.squaredNorm());
    return 0.5 * w.squaredNorm() - w.dot(f);
  };
  s.control_weight = Eigen::MatrixXd::Identity(2, 2);
  s.domain = Box::cube(2, 1.5);
  s.drift_jacobian = [](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    return (1.0 + x.squaredNorm()) * Eigen::MatrixXd::Identity(2, 2) + 2.0 * x * x.transpose();
  };
  // q = -s^2 - s^3/2 with s = |x|^2, so Hess q = 2 phi(s) I + 4 phi'(s) x x^T, phi = -2 s - 1.5 s^2.
  s.state_cost_hessian = [](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    const double r2 = x.squaredNorm();
    const double phi = -2.0 * r2 - 1.5 * r2 * r2;
    const double dphi = -2.0 - 3.0 * r2;
    return 2.0 * phi * Eigen::MatrixXd::Identity(2, 2) + 4.0 * dphi * x * x.transpose();
  };
  ExactSolution ex;
  ex.value = [](const Eigen::VectorXd& x) {
    const double r2 = x.squaredNorm();
    return r2 + 0.25 * r2 * r2;
  };
  ex.gradient = grad_v;
  ex.control = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return -2.0 * x * (1.0 + 0.5 * x.squaredNorm()); };
  s.exact = ex;
  return s;
}

SystemModel builtin_vdp(double mu, const Eigen::Matrix2d& state_weight, double control_weight) {
  if (!(mu > 0.0)) throw InputError("vanderpol: mu must be > 0");
  if (!(control_weight > 0.0)) throw InputError("vanderpol: control weight must be > 0");
  SystemModel s;
  s.name = "vanderpol";
  s.n = 2;
  s.m = 1;
  s.drift = [mu](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd f(2);
    f << x[1], -x[0] + mu * (1.0 - x[0] * x[0]) * x[1];
    return f;
  };
  s.input_map = [](const Eigen::VectorXd&) -> Eigen::MatrixXd {
    Eigen::MatrixXd g(2, 1);
    g << 0.0, 1.0;
    return g;
  };
  const Eigen::MatrixXd W = state_weight;
  s.state_cost = [W](const Eigen::VectorXd& x) { return x.dot(W * x); };
  s.control_weight = Eigen::MatrixXd::Constant(1, 1, control_weight);
  s.domain = Box::cube(2, 2.0);
  s.drift_jacobian = [mu](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
    Eigen::MatrixXd J(2, 2);
    J << 0.0, 1.0, -1.0 - 2.0 * mu * x[0] * x[1], mu * (1.0 - x[0] * x[0]);
    return J;
  };
  s.state_cost_hessian = [W](const Eigen::VectorXd&) -> Eigen::MatrixXd { return W + W.transpose(); };
  return s;
}

SystemModel builtin_by_name(const std::string& name, double mu) {
  if (name == "poly1d") return builtin_1d();
  if (name == "radial2d") return builtin_2d();
  if (name == "vanderpol") return builtin_vdp(mu);
  throw InputError("unknown system '" + name + "' (expected poly1d, radial2d or vanderpol)");
}

SystemModel with_quadratic_state_cost(const SystemModel& model, const Eigen::MatrixXd& Q) {
  if (Q.rows() != model.n || Q.cols() != model.n) throw InputError("state weight must be n x n");
  SystemModel s = model;
  const Eigen::MatrixXd W = 0.5 * (Q + Q.transpose());
  s.state_cost = [W](const Eigen::VectorXd& x) { return 0.5 * x.dot(W * x); };
  s.state_cost_hessian = [W](const Eigen::VectorXd&) { return W; };
  if (s.exact) s.exact->optimal_for_cost = false;
  return s;
}

SystemModel uncontrolled_system(std::string name, int n, VectorField drift, MatrixField jacobian,
                                ScalarField cost, MatrixField cost_hessian, Box domain) {
  SystemModel s;
  s.name = std::move(name);
  s.n = n;
  s.m = 1;
  s.drift = std::move(drift);
  s.input_map = [n](const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(n, 1); };
  s.state_cost = std::move(cost);
  s.control_weight = Eigen::MatrixXd::Ones(1, 1);
  s.domain = std::move(domain);
  s.drift_jacobian = std::move(jacobian);
  s.state_cost_hessian = std::move(cost_hessian);
  return s;
}

}  // namespace hjbk

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace hjbk {

enum class KernelFamily { PolynomialIso, Gaussian };

/// Scalar reproducing kernel on R^n.
///
/// PolynomialIso: k(x, y) = (c + x^T y)^d with integer d >= 2 and c > 0.
/// Gaussian:      k(x, y) = exp(-|x - y|^2 / (2 sigma^2)).
struct KernelSpec {
  KernelFamily family = KernelFamily::PolynomialIso;
  int degree = 4;
  double offset = 1.0;
  double bandwidth = 1.0;
  int dim = 1;

  static KernelSpec polynomial(int dim, int degree, double offset);
  static KernelSpec gaussian(int dim, double bandwidth);

  /// Throws InputError when the family parameters are out of range.
  void validate() const;

  bool operator==(const KernelSpec&) const = default;
};

std::string to_string(KernelFamily family);

/// JSON form {"family", "degree", "offset", "bandwidth"}; the dimension is supplied by the system.
nlohmann::json kernel_to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const nlohmann::json& j, int dim);

double eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);
Eigen::VectorXd grad_x(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);
/// Hessian with respect to the first argument. Only the upper triangle is computed; the
/// lower triangle is a copy, so the result is bitwise symmetric.
Eigen::MatrixXd hess_x(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Kernel expansion nodes, stored column-wise (n x M).
struct CenterSet {
  Eigen::MatrixXd points;
  std::string descriptor = "explicit";

  int dim() const { return static_cast<int>(points.rows()); }
  int size() const { return static_cast<int>(points.cols()); }
  Eigen::VectorXd point(int i) const { return points.col(i); }

  /// Tensor grid with endpoints included along every axis (linspace semantics).
  static CenterSet uniform_grid(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                const std::vector<int>& counts);
  static CenterSet from_points(const std::vector<Eigen::VectorXd>& pts);

  double min_pairwise_distance() const;
};

/// Per-point kernel data: k[i] = k(x, c_i), G.col(i) = grad_x k(x, c_i), H[i] = hess_x k(x, c_i).
/// V(x) = k^T p, grad V(x) = G p and Hess V(x) = sum_i p_i H[i] are all linear in p.
struct FeatureRows {
  Eigen::VectorXd k;
  Eigen::MatrixXd G;
  std::vector<Eigen::MatrixXd> H;
};

FeatureRows feature_rows(const KernelSpec& spec, const CenterSet& centers, const Eigen::VectorXd& x);

/// Exact integer power by repeated multiplication; negative bases are fine.
double int_pow(double base, int exponent);

}  // namespace hjbk

#include "hjbk/kernel.hpp"

#include <cmath>
#include <limits>

#include "hjbk/errors.hpp"

namespace hjbk {

namespace {

void check_dims(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != spec.dim || y.size() != spec.dim) {
    throw InputError("kernel: point dimension mismatch (expected " + std::to_string(spec.dim) +
                     ", got " + std::to_string(x.size()) + " and " + std::to_string(y.size()) + ")");
  }
}

// x^T y with a fixed summation order so that eval(x, y) == eval(y, x) bitwise.
double dot(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double squared_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

}  // namespace

double int_pow(double base, int exponent) {
  double result = 1.0;
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

KernelSpec KernelSpec::polynomial(int dim, int degree, double offset) {
  KernelSpec s;
  s.family = KernelFamily::PolynomialIso;
  s.dim = dim;
  s.degree = degree;
  s.offset = offset;
  s.validate();
  return s;
}

KernelSpec KernelSpec::gaussian(int dim, double bandwidth) {
  KernelSpec s;
  s.family = KernelFamily::Gaussian;
  s.dim = dim;
  s.bandwidth = bandwidth;
  s.validate();
  return s;
}

void KernelSpec::validate() const {
  if (dim < 1) throw InputError("kernel: dimension must be positive");
  switch (family) {
    case KernelFamily::PolynomialIso:
      // d = 1 has a vanishing Hessian, so the Riccati Hessian constraint cannot be met.
      if (degree < 2) throw InputError("kernel: polynomial degree must be >= 2");
      if (!(offset > 0.0)) throw InputError("kernel: polynomial offset must be > 0");
      break;
    case KernelFamily::Gaussian:
      if (!(bandwidth > 0.0)) throw InputError("kernel: gaussian bandwidth must be > 0");
      break;
  }
}

std::string to_string(KernelFamily family) {
  return family == KernelFamily::PolynomialIso ? "polynomial" : "gaussian";
}

nlohmann::json kernel_to_json(const KernelSpec& spec) {
  return {{"family", to_string(spec.family)},
          {"degree", spec.degree},
          {"offset", spec.offset},
          {"bandwidth", spec.bandwidth}};
}

KernelSpec kernel_from_json(const nlohmann::json& j, int dim) {
  if (!j.is_object()) throw InputError("kernel: expected an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "family" && key != "degree" && key != "offset" && key != "bandwidth") {
      throw InputError("kernel: unknown field '" + key + "'");
    }
  }
  KernelSpec s;
  s.dim = dim;
  const std::string family = j.at("family").get<std::string>();
  if (family == "polynomial") {
    s.family = KernelFamily::PolynomialIso;
  } else if (family == "gaussian") {
    s.family = KernelFamily::Gaussian;
  } else {
    throw InputError("kernel: unknown family '" + family + "'");
  }
  if (j.contains("degree")) s.degree = j.at("degree").get<int>();
  if (j.contains("offset")) s.offset = j.at("offset").get<double>();
  if (j.contains("bandwidth")) s.bandwidth = j.at("bandwidth").get<double>();
  s.validate();
  return s;
}

double eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  check_dims(spec, x, y);
  if (spec.family == KernelFamily::PolynomialIso) {
    return int_pow(spec.offset + dot(x, y), spec.degree);
  }
  return std::exp(-squared_distance(x, y) / (2.0 * spec.bandwidth * spec.bandwidth));
}

Eigen::VectorXd grad_x(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  check_dims(spec, x, y);
  if (spec.family == KernelFamily::PolynomialIso) {
    const double base = spec.offset + dot(x, y);
    return (spec.degree * int_pow(base, spec.degree - 1)) * y;
  }
  const double s2 = spec.bandwidth * spec.bandwidth;
  const double k = std::exp(-squared_distance(x, y) / (2.0 * s2));
  return (-k / s2) * (x - y);
}

Eigen::MatrixXd hess_x(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  check_dims(spec, x, y);
  const int n = spec.dim;
  Eigen::MatrixXd h(n, n);
  if (spec.family == KernelFamily::PolynomialIso) {
    const double base = spec.offset + dot(x, y);
    const double scale = spec.degree * (spec.degree - 1) * int_pow(base, spec.degree - 2);
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) h(r, c) = scale * (y[r] * y[c]);
  } else {
    const double s2 = spec.bandwidth * spec.bandwidth;
    const double k = std::exp(-squared_distance(x, y) / (2.0 * s2));
    const Eigen::VectorXd d = x - y;
    for (int r = 0; r < n; ++r)
      for (int c = r; c < n; ++c) h(r, c) = k * (d[r] * d[c] / (s2 * s2) - (r == c ? 1.0 / s2 : 0.0));
  }
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < r; ++c) h(r, c) = h(c, r);
  return h;
}

CenterSet CenterSet::uniform_grid(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                  const std::vector<int>& counts) {
  const int n = static_cast<int>(lower.size());
  if (upper.size() != n || static_cast<int>(counts.size()) != n || n == 0) {
    throw InputError("grid: bounds and counts must share one positive dimension");
  }
  int total = 1;
  for (int i = 0; i < n; ++i) {
    if (counts[i] < 1) throw InputError("grid: per-axis counts must be >= 1");
    if (!(upper[i] >= lower[i])) throw InputError("grid: upper bound below lower bound");
    total *= counts[i];
  }
  CenterSet set;
  set.points.resize(n, total);
  std::vector<int> idx(n, 0);
  for (int col = 0; col < total; ++col) {
    for (int a = 0; a < n; ++a) {
      const double t = counts[a] == 1 ? 0.5 : static_cast<double>(idx[a]) / (counts[a] - 1);
      set.points(a, col) = counts[a] == 1 ? 0.5 * (lower[a] + upper[a])
                                          : lower[a] + t * (upper[a] - lower[a]);
    }
    // Last axis varies fastest.
    for (int a = n - 1; a >= 0; --a) {
      if (++idx[a] < counts[a]) break;
      idx[a] = 0;
    }
  }
  std::string desc = "grid[";
  for (int a = 0; a < n; ++a) desc += (a ? "x" : "") + std::to_string(counts[a]);
  set.descriptor = desc + "]";
  return set;
}

CenterSet CenterSet::from_points(const std::vector<Eigen::VectorXd>& pts) {
  if (pts.empty()) throw InputError("centers: empty point list");
  CenterSet set;
  const auto n = pts.front().size();
  set.points.resize(n, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].size() != n) throw InputError("centers: inconsistent point dimensions");
    set.points.col(static_cast<Eigen::Index>(i)) = pts[i];
  }
  set.descriptor = "explicit";
  return set;
}

double CenterSet::min_pairwise_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < size(); ++i)
    for (int j = i + 1; j < size(); ++j) best = std::min(best, (points.col(i) - points.col(j)).norm());
  return best;
}

FeatureRows feature_rows(const KernelSpec& spec, const CenterSet& centers, const Eigen::VectorXd& x) {
  if (centers.size() == 0) throw InputError("feature_rows: empty center set");
  if (centers.dim() != spec.dim || x.size() != spec.dim) {
    throw InputError("feature_rows: dimension mismatch");
  }
  const int m = centers.size();
  FeatureRows rows;
  rows.k.resize(m);
  rows.G.resize(spec.dim, m);
  rows.H.reserve(m);
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd c = centers.points.col(i);
    rows.k[i] = eval(spec, x, c);
    rows.G.col(i) = grad_x(spec, x, c);
    rows.H.push_back(hess_x(spec, x, c));
  }
  return rows;
}

}  // namespace hjbk

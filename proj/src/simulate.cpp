#include "hjbk/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "hjbk/errors.hpp"

namespace hjbk {

InitialConditions InitialConditions::explicit_list(std::vector<Eigen::VectorXd> pts) {
  InitialConditions ic;
  ic.kind = Kind::Explicit;
  ic.points = std::move(pts);
  return ic;
}

InitialConditions InitialConditions::span(Eigen::VectorXd from, Eigen::VectorXd to, int count) {
  InitialConditions ic;
  ic.kind = Kind::Span;
  ic.from = std::move(from);
  ic.to = std::move(to);
  ic.count = count;
  return ic;
}

InitialConditions InitialConditions::circle(double radius, int count) {
  InitialConditions ic;
  ic.kind = Kind::Circle;
  ic.radius = radius;
  ic.count = count;
  return ic;
}

std::vector<Eigen::VectorXd> InitialConditions::expand(int n) const {
  std::vector<Eigen::VectorXd> out;
  switch (kind) {
    case Kind::Explicit:
      out = points;
      break;
    case Kind::Span:
      if (from.size() != n || to.size() != n) throw InputError("initial conditions: span endpoints must have dimension n");
      if (count < 1) throw InputError("initial conditions: span count must be >= 1");
      for (int k = 0; k < count; ++k) {
        const double s = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
        out.push_back(from + s * (to - from));
      }
      break;
    case Kind::Circle:
      if (n != 2) throw InputError("initial conditions: circle requires a 2-dimensional state");
      if (!(radius > 0.0) || count < 1) throw InputError("initial conditions: circle needs radius > 0 and count >= 1");
      for (int k = 0; k < count; ++k) {
        const double th = 2.0 * std::numbers::pi * k / count;
        Eigen::VectorXd x(2);
        x << radius * std::cos(th), radius * std::sin(th);
        out.push_back(x);
      }
      break;
  }
  if (out.empty()) throw InputError("initial conditions: list is empty");
  for (const auto& x : out) {
    if (x.size() != n) throw InputError("initial conditions: state of dimension " + std::to_string(x.size()) +
                                        ", expected " + std::to_string(n));
  }
  return out;
}

std::vector<std::string> InitialConditions::labels(int n) const {
  const auto pts = expand(n);
  std::vector<std::string> out;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    std::ostringstream os;
    if (kind == Kind::Circle) {
      os << "theta=" << std::setprecision(6) << 360.0 * static_cast<double>(k) / count;
    } else {
      os << "x0=(";
      for (Eigen::Index i = 0; i < pts[k].size(); ++i) os << (i ? "," : "") << std::setprecision(6) << pts[k][i];
      os << ")";
    }
    out.push_back(os.str());
  }
  return out;
}

void SimulationConfig::validate() const {
  if (!(horizon > 0.0)) throw InputError("simulation: horizon must be > 0");
  if (stepper == Stepper::RungeKutta4 && !(step > 0.0 && step <= horizon)) {
    throw InputError("simulation: fixed step must satisfy 0 < h <= T");
  }
  if (stepper == Stepper::DormandPrince && !(rel_tol > 0.0 && rel_tol <= 1e-2)) {
    throw InputError("simulation: relative tolerance must lie in (0, 1e-2]");
  }
  if (output_samples < 2) throw InputError("simulation: at least 2 output samples required");
  if (!(blowup_norm > 0.0)) throw InputError("simulation: blow-up norm must be > 0");
}

namespace {

struct ClosedLoop {
  const SystemModel& model;
  const Feedback& feedback;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    return model.drift(x) + model.input_map(x) * feedback(x);
  }
};

Eigen::VectorXd rk4_step(const ClosedLoop& rhs, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd k1 = rhs(x);
  const Eigen::VectorXd k2 = rhs(x + 0.5 * h * k1);
  const Eigen::VectorXd k3 = rhs(x + 0.5 * h * k2);
  const Eigen::VectorXd k4 = rhs(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Dormand-Prince 5(4), advancing exactly to t + span with error control.
Eigen::VectorXd dopri_advance(const ClosedLoop& rhs, Eigen::VectorXd x, double span, double& h,
                              const SimulationConfig& cfg, int& steps) {
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  double done = 0.0;
  while (done < span) {
    const double hh = std::min(h, span - done);
    const Eigen::VectorXd k1 = rhs(x);
    const Eigen::VectorXd k2 = rhs(x + hh * a21 * k1);
    const Eigen::VectorXd k3 = rhs(x + hh * (a31 * k1 + a32 * k2));
    const Eigen::VectorXd k4 = rhs(x + hh * (a41 * k1 + a42 * k2 + a43 * k3));
    const Eigen::VectorXd k5 = rhs(x + hh * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Eigen::VectorXd k6 = rhs(x + hh * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Eigen::VectorXd xn = x + hh * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Eigen::VectorXd k7 = rhs(xn);
    const Eigen::VectorXd err = hh * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double en = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(x[i]), std::abs(xn[i]));
      en = std::max(en, std::abs(err[i]) / sc);
    }
    ++steps;
    if (!std::isfinite(en)) {
      h = hh * 0.1;
      if (h < 1e-14 * std::max(1.0, span)) return xn;  // let the caller's blow-up check report it
      continue;
    }
    if (en <= 1.0) {
      x = xn;
      done += hh;
    }
    const double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
    h = std::max(hh * factor, 1e-12);
    if (!x.allFinite() || x.norm() > cfg.blowup_norm) return x;
  }
  return x;
}

}  // namespace

Trajectory integrate(const SystemModel& model, const Feedback& feedback, const Eigen::VectorXd& x0,
                     const SimulationConfig& config, const ScalarField& value) {
  config.validate();
  if (x0.size() != model.n) throw InputError("integrate: initial state has the wrong dimension");
  const ClosedLoop rhs{model, feedback};
  const int N = config.output_samples;
  const double dt_out = config.horizon / (N - 1);
  const int substeps = static_cast<int>(std::ceil(dt_out / config.step - 1e-9));
  const double h_fixed = dt_out / substeps;
  double h_adapt = std::min(dt_out, 1e-3);

  Trajectory tr;
  tr.x0 = x0;
  tr.t.resize(N);
  tr.x.resize(N, model.n);
  tr.u.resize(N, model.m);
  tr.cost.resize(N);
  tr.norm.resize(N);
  if (value) tr.value.resize(N);

  const Eigen::MatrixXd& D = model.control_weight;
  auto record = [&](int k, const Eigen::VectorXd& x) {
    tr.t[k] = k * dt_out;
    tr.x.row(k) = x.transpose();
    const Eigen::VectorXd u = feedback(x);
    tr.u.row(k) = u.transpose();
    tr.norm[k] = x.norm();
    if (value) tr.value[k] = value(x);
    const double integrand = model.state_cost(x) + 0.5 * u.dot(D * u);
    if (k == 0) {
      tr.cost[0] = 0.0;
    } else {
      const Eigen::VectorXd xp = tr.x.row(k - 1).transpose();
      const Eigen::VectorXd up = tr.u.row(k - 1).transpose();
      const double prev = model.state_cost(xp) + 0.5 * up.dot(D * up);
      tr.cost[k] = tr.cost[k - 1] + 0.5 * dt_out * (prev + integrand);
    }
    if (!tr.left_domain && !model.domain.contains(x)) {
      tr.left_domain = true;
      tr.left_domain_time = tr.t[k];
    }
  };

  Eigen::VectorXd x = x0;
  record(0, x);
  for (int k = 1; k < N; ++k) {
    if (config.stepper == SimulationConfig::Stepper::RungeKutta4) {
      for (int s = 0; s < substeps; ++s) {
        x = rk4_step(rhs, x, h_fixed);
        ++tr.steps;
        if (!x.allFinite() || x.norm() > config.blowup_norm) break;
      }
    } else {
      x = dopri_advance(rhs, x, dt_out, h_adapt, config, tr.steps);
    }
    if (!x.allFinite() || x.norm() > config.blowup_norm) {
      std::ostringstream os;
      os << "integrate: state blew up (|x| > " << config.blowup_norm << " or non-finite) near t = " << k * dt_out;
      throw SimulationError(os.str());
    }
    record(k, x);
  }
  tr.final_norm = tr.norm[N - 1];
  return tr;
}

double cost_of_trajectory(const SystemModel& model, const Trajectory& traj) {
  const Eigen::Index N = traj.t.size();
  double J = 0.0;
  double prev = 0.0;
  for (Eigen::Index k = 0; k < N; ++k) {
    const Eigen::VectorXd x = traj.x.row(k).transpose();
    const Eigen::VectorXd u = traj.u.row(k).transpose();
    const double cur = model.state_cost(x) + 0.5 * u.dot(model.control_weight * u);
    if (k > 0) J += 0.5 * (traj.t[k] - traj.t[k - 1]) * (prev + cur);
    prev = cur;
  }
  return J;
}

namespace {

DecayFit line_fit(const std::vector<double>& t, const std::vector<double>& y, double x0_norm) {
  DecayFit f;
  f.points = static_cast<int>(t.size());
  Eigen::MatrixXd A(t.size(), 2);
  Eigen::VectorXd b(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    A(static_cast<Eigen::Index>(i), 0) = 1.0;
    A(static_cast<Eigen::Index>(i), 1) = t[i];
    b[static_cast<Eigen::Index>(i)] = y[i];
  }
  const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
  f.beta = -c[1];
  f.alpha = x0_norm > 0.0 ? std::exp(c[0]) / x0_norm : 0.0;
  return f;
}

}  // namespace

DecayFit fit_decay(const Trajectory& traj) {
  const double T = traj.t[traj.t.size() - 1];
  const double x0n = traj.x0.norm();
  std::vector<double> t, y, t_all, y_all;
  for (Eigen::Index k = 0; k < traj.t.size(); ++k) {
    if (!(traj.norm[k] > 1e-12)) continue;
    t_all.push_back(traj.t[k]);
    y_all.push_back(std::log(traj.norm[k]));
    if (traj.t[k] >= 0.5 * T) {
      t.push_back(traj.t[k]);
      y.push_back(std::log(traj.norm[k]));
    }
  }
  if (t.size() >= 2) return line_fit(t, y, x0n);
  if (t_all.size() >= 2) {
    DecayFit f = line_fit(t_all, y_all, x0n);
    f.from_tail = false;
    return f;
  }
  DecayFit f;
  f.from_tail = false;
  return f;
}

SimulationResult run_batch(const SystemModel& model, const Feedback& feedback, const SimulationConfig& config,
                           const ScalarField& value) {
  config.validate();
  const auto ics = config.initial.expand(model.n);
  const auto labels = config.initial.labels(model.n);
  SimulationResult res;
  std::vector<std::string> failures;
  for (std::size_t k = 0; k < ics.size(); ++k) {
    try {
      Trajectory tr = integrate(model, feedback, ics[k], config, value);
      tr.label = labels[k];
      res.trajectories.push_back(std::move(tr));
    } catch (const SimulationError& e) {
      failures.push_back(labels[k] + ": " + e.what());
    }
  }
  if (!failures.empty()) {
    std::string msg = "run_batch: " + std::to_string(failures.size()) + " trajectory(ies) blew up";
    for (const auto& f : failures) msg += "\n  " + f;
    throw SimulationError(msg);
  }
  double sum = 0.0;
  res.decay.alpha = 0.0;
  res.decay.beta = std::numeric_limits<double>::infinity();
  for (const auto& tr : res.trajectories) {
    res.max_final_norm = std::max(res.max_final_norm, tr.final_norm);
    sum += tr.final_norm;
    const DecayFit f = fit_decay(tr);
    res.fits.push_back(f);
    res.decay.alpha = std::max(res.decay.alpha, f.alpha);
    res.decay.beta = std::min(res.decay.beta, f.beta);
    res.decay.points += f.points;
    res.decay.from_tail = res.decay.from_tail && f.from_tail;
  }
  res.mean_final_norm = sum / static_cast<double>(res.trajectories.size());
  return res;
}

std::string trajectories_csv(const SimulationResult& result) {
  std::ostringstream os;
  os << std::setprecision(12);
  if (result.trajectories.empty()) return "";
  const auto n = result.trajectories.front().x.cols();
  const auto m = result.trajectories.front().u.cols();
  os << "traj,t";
  for (Eigen::Index i = 0; i < n; ++i) os << ",x_" << i + 1;
  for (Eigen::Index i = 0; i < m; ++i) os << ",u_" << i + 1;
  os << ",norm,V\n";
  for (std::size_t k = 0; k < result.trajectories.size(); ++k) {
    const Trajectory& tr = result.trajectories[k];
    for (Eigen::Index r = 0; r < tr.t.size(); ++r) {
      os << k << ',' << tr.t[r];
      for (Eigen::Index i = 0; i < n; ++i) os << ',' << tr.x(r, i);
      for (Eigen::Index i = 0; i < m; ++i) os << ',' << tr.u(r, i);
      os << ',' << tr.norm[r] << ',';
      if (tr.value.size() > 0) os << tr.value[r];
      os << '\n';
    }
  }
  return os.str();
}

nlohmann::json batch_summary(const SimulationResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < result.trajectories.size(); ++k) {
    const Trajectory& tr = result.trajectories[k];
    nlohmann::json row;
    row["index"] = k;
    row["label"] = tr.label;
    row["x0"] = std::vector<double>(tr.x0.data(), tr.x0.data() + tr.x0.size());
    const Eigen::VectorXd xf = tr.x.row(tr.x.rows() - 1).transpose();
    row["x_final"] = std::vector<double>(xf.data(), xf.data() + xf.size());
    row["final_norm"] = tr.final_norm;
    row["cost"] = tr.cost[tr.cost.size() - 1];
    row["left_domain"] = tr.left_domain;
    if (tr.left_domain) row["left_domain_time"] = tr.left_domain_time;
    if (k < result.fits.size()) {
      row["decay_alpha"] = result.fits[k].alpha;
      row["decay_beta"] = result.fits[k].beta;
    }
    rows.push_back(row);
  }
  nlohmann::json j;
  j["trajectories"] = rows;
  j["count"] = result.trajectories.size();
  j["max_final_norm"] = result.max_final_norm;
  j["mean_final_norm"] = result.mean_final_norm;
  j["decay"] = {{"alpha", result.decay.alpha}, {"beta", result.decay.beta}, {"tail_window", result.decay.from_tail}};
  return j;
}

}  // namespace hjbk

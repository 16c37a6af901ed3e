#include "hjbk/conic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Eigenvalues>

namespace hjbk {

Eigen::MatrixXd PsdBlock::evaluate(const Eigen::VectorXd& p) const {
  Eigen::MatrixXd F = constant;
  for (std::size_t i = 0; i < coeffs.size(); ++i) F += p[static_cast<Eigen::Index>(i)] * coeffs[i];
  return F;
}

void ConicProgram::validate() const {
  if (num_vars < 1) throw InputError("conic: program needs at least one variable");
  if (eq_matrix.rows() != eq_rhs.size() || (eq_matrix.rows() > 0 && eq_matrix.cols() != num_vars)) {
    throw InputError("conic: equality rows have the wrong shape");
  }
  if (ineq_matrix.rows() != ineq_lower.size() || ineq_matrix.rows() != ineq_upper.size() ||
      (ineq_matrix.rows() > 0 && ineq_matrix.cols() != num_vars)) {
    throw InputError("conic: inequality rows have the wrong shape");
  }
  for (Eigen::Index r = 0; r < ineq_lower.size(); ++r) {
    if (ineq_lower[r] > ineq_upper[r]) throw InputError("conic: inequality lower bound exceeds upper bound");
  }
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto& b = blocks[j];
    if (b.constant.rows() != b.constant.cols() || b.size() < 1) throw InputError("conic: PSD block must be square");
    if (static_cast<int>(b.coeffs.size()) != num_vars) throw InputError("conic: PSD block needs one matrix per variable");
    if (!(b.constant - b.constant.transpose()).isZero(0.0)) throw InputError("conic: PSD block constant not symmetric");
    for (const auto& c : b.coeffs) {
      if (c.rows() != b.size() || c.cols() != b.size()) throw InputError("conic: PSD coefficient has the wrong size");
      if (!(c - c.transpose()).isZero(0.0)) throw InputError("conic: PSD coefficient not symmetric");
    }
  }
}

namespace {

nlohmann::json dense_rows(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<double> pack_upper(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = r; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

}  // namespace

nlohmann::json conic_to_json(const ConicProgram& program) {
  nlohmann::json j;
  j["num_vars"] = program.num_vars;
  j["objective"] = "sum_squares";
  j["equalities"] = {{"rows", dense_rows(program.eq_matrix)}, {"rhs", to_std(program.eq_rhs)}};
  j["inequalities"] = {{"rows", dense_rows(program.ineq_matrix)},
                       {"lower", to_std(program.ineq_lower)},
                       {"upper", to_std(program.ineq_upper)}};
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : program.blocks) {
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& c : b.coeffs) coeffs.push_back(pack_upper(c));
    blocks.push_back({{"size", b.size()}, {"constant", pack_upper(b.constant)}, {"coefficients", coeffs}});
  }
  j["psd_blocks"] = blocks;
  j["packing"] = "upper triangle, row-major";
  return j;
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::MaxIterations: return "max_iterations";
  }
  return "unknown";
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

FeasibilityReport check_feasibility(const ConicProgram& program, const Eigen::VectorXd& p) {
  FeasibilityReport r;
  if (program.eq_matrix.rows() > 0) {
    r.max_equality_violation = (program.eq_matrix * p - program.eq_rhs).cwiseAbs().maxCoeff();
  }
  if (program.ineq_matrix.rows() > 0) {
    const Eigen::VectorXd v = program.ineq_matrix * p;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      r.max_inequality_violation =
          std::max({r.max_inequality_violation, program.ineq_lower[i] - v[i], v[i] - program.ineq_upper[i]});
    }
  }
  r.min_block_eigenvalue = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < program.blocks.size(); ++j) {
    const double e = min_eigenvalue(program.blocks[j].evaluate(p));
    if (e < r.min_block_eigenvalue) {
      r.min_block_eigenvalue = e;
      r.worst_block = static_cast<int>(j);
    }
  }
  if (program.blocks.empty()) r.min_block_eigenvalue = 0.0;
  return r;
}

namespace {

// Block F(y) = C + sum_i y_i mat(L.col(i)), column-major vectorization.
struct BarrierBlock {
  int size = 0;
  Eigen::MatrixXd C;
  Eigen::MatrixXd L;
  int source = -1;
};

// Self-concordant barrier problem over y in R^k:
//   minimize 1/2 y^T diag(hq) y + c^T y   s.t.  F_j(y) > 0,  A y + b > 0.
struct BarrierProblem {
  std::vector<BarrierBlock> blocks;
  Eigen::MatrixXd lin_A;
  Eigen::VectorXd lin_b;
  Eigen::VectorXd hq;
  Eigen::VectorXd c;

  int dim() const { return static_cast<int>(c.size()); }

  double theta() const {
    double t = static_cast<double>(lin_b.size());
    for (const auto& b : blocks) t += b.size;
    return t;
  }

  double objective(const Eigen::VectorXd& y) const { return 0.5 * y.dot(hq.cwiseProduct(y)) + c.dot(y); }

  Eigen::MatrixXd block_value(const BarrierBlock& b, const Eigen::VectorXd& y) const {
    const Eigen::VectorXd v = b.L * y;
    return b.C + Eigen::Map<const Eigen::MatrixXd>(v.data(), b.size, b.size);
  }

  // Barrier value, or nullopt when y is not strictly feasible.
  std::optional<double> barrier(const Eigen::VectorXd& y) const {
    double phi = 0.0;
    for (const auto& b : blocks) {
      Eigen::MatrixXd F = block_value(b, y);
      F = 0.5 * (F + F.transpose());
      Eigen::LLT<Eigen::MatrixXd> llt(F);
      if (llt.info() != Eigen::Success) return std::nullopt;
      const Eigen::VectorXd d = llt.matrixLLT().diagonal();
      if (!(d.minCoeff() > 0.0) || !d.allFinite()) return std::nullopt;
      phi -= 2.0 * d.array().log().sum();
    }
    if (lin_b.size() > 0) {
      const Eigen::VectorXd g = lin_A * y + lin_b;
      if (!(g.minCoeff() > 0.0)) return std::nullopt;
      phi -= g.array().log().sum();
    }
    return phi;
  }

  void derivatives(const Eigen::VectorXd& y, double t, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
    const int k = dim();
    grad = t * (hq.cwiseProduct(y) + c);
    hess = Eigen::MatrixXd::Zero(k, k);
    hess.diagonal() += t * hq;
    for (const auto& b : blocks) {
      const int s = b.size;
      Eigen::MatrixXd F = block_value(b, y);
      F = 0.5 * (F + F.transpose());
      Eigen::LLT<Eigen::MatrixXd> llt(F);
      const Eigen::MatrixXd Linv =
          llt.matrixL().solve(Eigen::MatrixXd::Identity(s, s));
      Eigen::MatrixXd K(s * s, s * s);
      for (int r = 0; r < s; ++r)
        for (int q = 0; q < s; ++q) K.block(r * s, q * s, s, s) = Linv(r, q) * Linv;
      const Eigen::MatrixXd T = K * b.L;  // columns vec(Linv L_i Linv^T)
      for (int d = 0; d < s; ++d) grad -= T.row(d * s + d).transpose();
      hess.noalias() += T.transpose() * T;
    }
    if (lin_b.size() > 0) {
      const Eigen::VectorXd inv = (lin_A * y + lin_b).cwiseInverse();
      grad -= lin_A.transpose() * inv;
      hess.noalias() += lin_A.transpose() * inv.cwiseAbs2().asDiagonal() * lin_A;
    }
  }
};

struct CenteringResult {
  int steps = 0;
  bool stopped_early = false;
};

// Newton centering for t * f0 + barrier from a strictly feasible y.
template <typename EarlyStop>
CenteringResult center(const BarrierProblem& bp, double t, Eigen::VectorXd& y, int budget, EarlyStop&& early_stop) {
  CenteringResult res;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  for (int it = 0; it < 200 && res.steps < budget; ++it) {
    bp.derivatives(y, t, grad, hess);
    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    if (llt.info() != Eigen::Success) {
      hess.diagonal().array() += 1e-12 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
      llt.compute(hess);
    }
    const Eigen::VectorXd dy = -llt.solve(grad);
    const double decrement = -grad.dot(dy);
    ++res.steps;
    if (!(decrement >= 0.0) || decrement * 0.5 <= 1e-10) break;

    const double f_now = t * bp.objective(y) + *bp.barrier(y);
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 80; ++ls, step *= 0.5) {
      const Eigen::VectorXd trial = y + step * dy;
      const auto phi = bp.barrier(trial);
      if (!phi) continue;
      const double f_trial = t * bp.objective(trial) + *phi;
      if (f_trial <= f_now - 0.25 * step * decrement) {
        y = trial;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    if (early_stop(y)) {
      res.stopped_early = true;
      break;
    }
  }
  return res;
}

struct Reduction {
  Eigen::VectorXd p0;
  Eigen::MatrixXd Z;
  int dropped = 0;
};

Reduction reduce_equalities(const ConicProgram& program, const SolverSettings& settings, SolverStats& stats) {
  Reduction red;
  const int n = program.num_vars;
  if (program.eq_matrix.rows() == 0) {
    red.p0 = Eigen::VectorXd::Zero(n);
    red.Z = Eigen::MatrixXd::Identity(n, n);
    return red;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(program.eq_matrix, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv[0] : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > settings.rank_tolerance * smax) ++rank;
  red.dropped = static_cast<int>(program.eq_matrix.rows()) - rank;
  if (red.dropped > 0) {
    stats.warnings.push_back("equality rows are rank deficient; " + std::to_string(red.dropped) +
                             " dependent row(s) dropped");
  }
  const Eigen::MatrixXd U = svd.matrixU().leftCols(rank);
  const Eigen::MatrixXd V = svd.matrixV().leftCols(rank);
  red.p0 = V * (U.transpose() * program.eq_rhs).cwiseQuotient(sv.head(rank));
  red.Z = svd.matrixV().rightCols(n - rank);
  const double resid = (program.eq_matrix * red.p0 - program.eq_rhs).cwiseAbs().maxCoeff();
  if (resid > 1e-8 * (1.0 + program.eq_rhs.cwiseAbs().maxCoeff())) {
    throw InfeasibleError("conic: equality constraints are inconsistent (residual " + std::to_string(resid) + ")",
                          std::numeric_limits<double>::infinity(), {}, stats);
  }
  return red;
}

}  // namespace

SolveResult solve_conic(const ConicProgram& program, const SolverSettings& settings) {
  const auto wall_start = std::chrono::steady_clock::now();
  program.validate();
  SolverStats stats;
  const Reduction red = reduce_equalities(program, settings, stats);
  stats.dropped_equality_rows = red.dropped;
  const int nz = static_cast<int>(red.Z.cols());
  const int nvar = program.num_vars;

  auto finish = [&](const Eigen::VectorXd& p) {
    SolveResult out;
    out.p = p;
    const FeasibilityReport fr = check_feasibility(program, p);
    stats.primal_residual =
        std::max({fr.max_equality_violation, fr.max_inequality_violation, std::max(0.0, -fr.min_block_eigenvalue)});
    stats.min_block_eigenvalue = fr.min_block_eigenvalue;
    stats.objective = p.squaredNorm();
    stats.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    out.stats = stats;
    return out;
  };

  // Reduced blocks: F_j(z) = C_j(p0) + sum_k z_k mat(L_j Z e_k).
  std::vector<BarrierBlock> blocks;
  for (std::size_t j = 0; j < program.blocks.size(); ++j) {
    const PsdBlock& pb = program.blocks[j];
    const int s = pb.size();
    Eigen::MatrixXd Lfull(s * s, nvar);
    for (int i = 0; i < nvar; ++i) Lfull.col(i) = Eigen::Map<const Eigen::VectorXd>(pb.coeffs[static_cast<std::size_t>(i)].data(), s * s);
    BarrierBlock bb;
    bb.size = s;
    bb.source = static_cast<int>(j);
    const Eigen::VectorXd c0 = Lfull * red.p0;
    bb.C = pb.constant + Eigen::Map<const Eigen::MatrixXd>(c0.data(), s, s);
    bb.C = 0.5 * (bb.C + bb.C.transpose());
    bb.L = Lfull * red.Z;
    const double scale = std::max(Lfull.norm(), 1e-300);
    if (nz == 0 || bb.L.norm() <= 1e-10 * scale) {
      const double e = min_eigenvalue(bb.C);
      if (e < -settings.feasibility_tolerance) {
        stats.status = SolveStatus::Infeasible;
        throw InfeasibleError("conic: block " + std::to_string(j) + " is fixed by the equalities and indefinite",
                              -e, {{static_cast<int>(j), e}}, stats);
      }
      ++stats.constant_blocks;
      continue;
    }
    blocks.push_back(std::move(bb));
  }

  // Linear rows lower <= a^T p <= upper become a^T Z z + (a^T p0 - lower) > 0 etc.
  std::vector<Eigen::VectorXd> lin_rows;
  std::vector<double> lin_offsets;
  for (Eigen::Index r = 0; r < program.ineq_matrix.rows(); ++r) {
    const Eigen::VectorXd a = program.ineq_matrix.row(r).transpose();
    const Eigen::VectorXd az = red.Z.transpose() * a;
    const double ap0 = a.dot(red.p0);
    if (std::isfinite(program.ineq_lower[r])) {
      lin_rows.push_back(az);
      lin_offsets.push_back(ap0 - program.ineq_lower[r]);
    }
    if (std::isfinite(program.ineq_upper[r])) {
      lin_rows.push_back(-az);
      lin_offsets.push_back(program.ineq_upper[r] - ap0);
    }
  }
  std::vector<std::pair<int, double>> constant_rows;
  {
    std::vector<Eigen::VectorXd> kept_rows;
    std::vector<double> kept_offsets;
    for (std::size_t i = 0; i < lin_rows.size(); ++i) {
      if (nz == 0 || lin_rows[i].norm() <= 1e-12) {
        if (lin_offsets[i] < -settings.feasibility_tolerance) {
          throw InfeasibleError("conic: an inequality row is fixed by the equalities and violated", -lin_offsets[i],
                                {}, stats);
        }
        continue;
      }
      kept_rows.push_back(lin_rows[i]);
      kept_offsets.push_back(lin_offsets[i]);
    }
    lin_rows = std::move(kept_rows);
    lin_offsets = std::move(kept_offsets);
  }

  if (nz == 0 || (blocks.empty() && lin_rows.empty())) {
    // Fully determined, or only the objective remains: min |p0 + Z z|^2 gives z = -Z^T p0.
    Eigen::VectorXd p = red.p0;
    if (nz > 0) p = red.p0 - red.Z * (red.Z.transpose() * red.p0);
    stats.status = SolveStatus::Optimal;
    return finish(p);
  }

  const int nlin = static_cast<int>(lin_rows.size());
  auto assemble_linear = [&](int extra_cols, Eigen::MatrixXd& A, Eigen::VectorXd& b) {
    A = Eigen::MatrixXd::Zero(nlin, nz + extra_cols);
    b.resize(nlin);
    for (int i = 0; i < nlin; ++i) {
      A.row(i).head(nz) = lin_rows[static_cast<std::size_t>(i)].transpose();
      b[i] = lin_offsets[static_cast<std::size_t>(i)];
    }
  };

  // Phase I over y = (z, s).
  BarrierProblem ph1;
  for (const auto& b : blocks) {
    BarrierBlock bb = b;
    bb.L.conservativeResize(Eigen::NoChange, nz + 1);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(b.size, b.size);
    bb.L.col(nz) = Eigen::Map<const Eigen::VectorXd>(I.data(), b.size * b.size);
    ph1.blocks.push_back(std::move(bb));
  }
  assemble_linear(1, ph1.lin_A, ph1.lin_b);
  if (nlin > 0) ph1.lin_A.col(nz).setOnes();
  ph1.c = Eigen::VectorXd::Zero(nz + 1);
  ph1.c[nz] = 1.0;
  ph1.hq = Eigen::VectorXd::Constant(nz + 1, 1e-8);
  ph1.hq[nz] = 0.0;

  double worst = 0.0;
  for (const auto& b : blocks) worst = std::max(worst, -min_eigenvalue(b.C));
  for (int i = 0; i < nlin; ++i) worst = std::max(worst, -lin_offsets[static_cast<std::size_t>(i)]);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(nz + 1);
  y[nz] = worst + 1.0 + 0.1 * worst;

  const double theta1 = ph1.theta();
  double t = 1.0;
  int steps = 0;
  bool interior_found = y[nz] < 0.0;
  const double margin_target = -1e-3;
  while (!interior_found) {
    const auto res = center(ph1, t, y, settings.max_iterations - steps,
                            [&](const Eigen::VectorXd& yy) { return yy[nz] < margin_target; });
    steps += res.steps;
    if (y[nz] < 0.0) {
      interior_found = true;
      break;
    }
    if (theta1 / t <= 0.1 * settings.feasibility_tolerance) break;
    if (steps >= settings.max_iterations) {
      stats.iterations = steps;
      throw NumericalError("conic: iteration budget exhausted before a feasible point was found");
    }
    t *= 10.0;
  }
  stats.phase1_iterations = steps;

  const double shift_needed = y[nz];
  double shift = 0.0;
  if (!interior_found) {
    if (shift_needed > settings.feasibility_tolerance) {
      std::vector<InfeasibleError::Violation> viol;
      for (const auto& b : ph1.blocks) {
        Eigen::VectorXd yz = y;
        yz[nz] = 0.0;
        const double e = min_eigenvalue(ph1.block_value(b, yz));
        if (e < 0.0) viol.push_back({b.source, e});
      }
      std::sort(viol.begin(), viol.end(), [](const auto& a, const auto& b) { return a.min_eigenvalue < b.min_eigenvalue; });
      stats.status = SolveStatus::Infeasible;
      stats.iterations = steps;
      const std::string msg = "conic: program is infeasible (smallest uniform PSD shift " +
                              std::to_string(shift_needed) + ", " + std::to_string(viol.size()) + " block(s) violated)";
      throw InfeasibleError(msg, shift_needed, std::move(viol), stats);
    }
    // Feasible but with an empty interior: relax every constraint by a tolerance-sized shift.
    shift = std::max(shift_needed, 0.0) + settings.feasibility_tolerance;
    stats.interior_shift = shift;
    stats.warnings.push_back("feasible set has no interior; constraints relaxed by " + std::to_string(shift));
  }

  // Phase II over z.
  BarrierProblem ph2;
  for (const auto& b : blocks) {
    BarrierBlock bb = b;
    if (shift > 0.0) bb.C += shift * Eigen::MatrixXd::Identity(b.size, b.size);
    ph2.blocks.push_back(std::move(bb));
  }
  assemble_linear(0, ph2.lin_A, ph2.lin_b);
  if (shift > 0.0) ph2.lin_b.array() += shift;
  ph2.hq = Eigen::VectorXd::Constant(nz, 2.0);
  ph2.c = 2.0 * red.Z.transpose() * red.p0;
  const double const_obj = red.p0.squaredNorm();

  Eigen::VectorXd z = y.head(nz);
  const double theta2 = ph2.theta();
  t = theta2 / std::max(ph2.objective(z) + const_obj, 1e-6);
  stats.status = SolveStatus::MaxIterations;
  while (steps < settings.max_iterations) {
    const auto res = center(ph2, t, z, settings.max_iterations - steps, [](const Eigen::VectorXd&) { return false; });
    steps += res.steps;
    const double obj = ph2.objective(z) + const_obj;
    stats.duality_gap = theta2 / t;
    if (stats.duality_gap <= settings.tolerance * std::max(std::abs(obj), 1e-4)) {
      stats.status = SolveStatus::Optimal;
      break;
    }
    t *= 10.0;
  }
  stats.iterations = steps;
  if (stats.status == SolveStatus::MaxIterations) {
    stats.warnings.push_back("iteration budget exhausted; returning the last central-path point");
  }
  return finish(red.p0 + red.Z * z);
}

}  // namespace hjbk

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hjbk/errors.hpp"
#include "hjbk/pipeline.hpp"
#include "oracles.hpp"

using namespace hjbk;

namespace {

const SynthesisRun& cached_run(const std::string& name) {
  static std::map<std::string, SynthesisRun> runs;
  auto it = runs.find(name);
  if (it == runs.end()) it = runs.emplace(name, run_synthesis(builtin_experiment(name))).first;
  return it->second;
}

SynthesisProblem problem_for(const std::string& name, SynthesisOptions opts) {
  const ExperimentConfig c = builtin_experiment(name);
  const PreparedModel prep = prepare_model(c);
  const CenterSet centers = build_centers(c);
  opts.hessian_relaxation = c.hessian_relaxation;
  return assemble(prep.model, c.kernel, centers, build_collocation(c, centers), prep.are.P, opts);
}

// Coefficients from an external SDP solver, frozen as |p*|.
struct Reference {
  const char* experiment;
  double norm;
};
constexpr Reference kReferences[] = {
    {"poly1d", 0.07200580311376464},
    {"radial2d", 0.06691159573601894},
    {"vanderpol", 0.10955011005841736},
};

}  // namespace

TEST(Assemble, RowAndBlockCounts) {
  const auto& p1 = cached_run("poly1d").problem;
  EXPECT_EQ(p1.num_coefficients(), 25);
  EXPECT_EQ(p1.equality_rows(), 3);
  EXPECT_EQ(p1.inequality_rows(), 0);
  const ConicProgram c1 = to_conic(p1);
  EXPECT_EQ(c1.eq_matrix.rows(), 3);
  ASSERT_EQ(c1.blocks.size(), 25u);
  EXPECT_EQ(c1.blocks[0].size(), 2);

  const auto& p2 = cached_run("radial2d").problem;
  EXPECT_EQ(p2.num_coefficients(), 100);
  EXPECT_EQ(p2.equality_rows(), 6);
  const ConicProgram c2 = to_conic(p2);
  EXPECT_EQ(c2.eq_matrix.rows(), 6);
  ASSERT_EQ(c2.blocks.size(), 100u);
  EXPECT_EQ(c2.blocks[0].size(), 3);

  const auto& pv = cached_run("vanderpol").problem;
  EXPECT_EQ(pv.equality_rows(), 3);
  EXPECT_EQ(pv.inequality_rows(), 6);
  const ConicProgram cv = to_conic(pv);
  EXPECT_EQ(cv.eq_matrix.rows(), 3);
  EXPECT_EQ(cv.ineq_matrix.rows(), 3);
  EXPECT_EQ(cv.blocks[0].size(), 2);
}

TEST(Assemble, ValueRowAtOriginIsAllOnes) {
  const auto& p1 = cached_run("poly1d").problem;
  EXPECT_EQ(p1.origin.k, Eigen::VectorXd::Ones(25));
  const ConicProgram c1 = to_conic(p1);
  EXPECT_EQ(Eigen::VectorXd(c1.eq_matrix.row(0).transpose()), Eigen::VectorXd::Ones(25));
  EXPECT_EQ(c1.eq_rhs[0], 0.0);
  EXPECT_NEAR(c1.eq_rhs[2], 1.0 + std::sqrt(3.0), 1e-12);
}

TEST(Assemble, BlocksMatchConicProgram) {
  std::mt19937_64 rng(2);
  for (const char* name : {"poly1d", "radial2d", "vanderpol"}) {
    const auto& prob = cached_run(name).problem;
    const ConicProgram prog = to_conic(prob);
    for (int t = 0; t < 5; ++t) {
      const Eigen::VectorXd p = oracle::uniform(rng, prob.num_coefficients(), -1, 1);
      for (int j = 0; j < prob.grid.size(); ++j) {
        EXPECT_LT((lmi_block(prob, j, p) - prog.blocks[static_cast<std::size_t>(j)].evaluate(p)).norm(), 1e-10);
      }
    }
  }
}

TEST(Assemble, ZeroCoefficientBlock) {
  const auto& prob = cached_run("vanderpol").problem;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(prob.num_coefficients());
  for (int j = 0; j < prob.grid.size(); ++j) {
    const Eigen::MatrixXd M = lmi_block(prob, j, zero);
    EXPECT_DOUBLE_EQ(M(0, 0), 2.0 * prob.model.state_cost(prob.grid.point(j)));
    EXPECT_EQ(M(0, 1), 0.0);
    EXPECT_EQ(M(1, 1), 1.0);
  }
}

// min eig M(x) >= 0 exactly when the scalar HJB expression is >= 0.
TEST(SchurProperty, BlockSignMatchesHjbExpression) {
  std::mt19937_64 rng(17);
  for (const char* name : {"poly1d", "radial2d", "vanderpol"}) {
    const ExperimentConfig c = builtin_experiment(name);
    const PreparedModel prep = prepare_model(c);
    const Box& box = prep.model.domain;
    CollocationGrid grid;
    grid.points.resize(prep.model.n, 500);
    for (int j = 0; j < 500; ++j) {
      for (int i = 0; i < prep.model.n; ++i) {
        grid.points(i, j) = std::uniform_real_distribution<double>(box.lower[i], box.upper[i])(rng);
      }
    }
    for (bool precondition : {false, true}) {
      SynthesisOptions opts;
      opts.precondition_blocks = precondition;
      const SynthesisProblem prob = assemble(prep.model, c.kernel, build_centers(c), grid, prep.are.P, opts);
      int agree = 0, positive = 0, skipped = 0;
      for (int j = 0; j < 500; ++j) {
        const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-4, 0)(rng));
        const Eigen::VectorXd p = scale * oracle::uniform(rng, prob.num_coefficients(), -1, 1);
        const Eigen::VectorXd x = grid.point(j);
        const FeatureRows fr = feature_rows(c.kernel, prob.centers, x);
        const double r = hjb_expression(prob.model, x, fr.G * p);
        if (std::abs(r) <= 1e-9) {
          ++skipped;
          continue;
        }
        const bool psd = oracle::min_eig(lmi_block(prob, j, p)) >= 0.0;
        agree += (psd == (r >= 0.0));
        positive += psd;
      }
      EXPECT_EQ(agree, 500 - skipped) << name;
      EXPECT_GT(positive, 0) << name;
      EXPECT_LT(positive, 500 - skipped) << name;
    }
  }
}

TEST(Synthesis, MatchesReferenceObjectives) {
  for (const auto& ref : kReferences) {
    const auto& run = cached_run(ref.experiment);
    const double norm = run.outcome.vf.coefficients().norm();
    EXPECT_NEAR(norm, ref.norm, 2e-4 * ref.norm) << ref.experiment;
  }
}

TEST(Synthesis, CollocationLmiHoldsAtOptimum) {
  for (const char* name : {"poly1d", "radial2d", "vanderpol"}) {
    const auto& run = cached_run(name);
    EXPECT_GE(run.outcome.min_collocation_eigenvalue, -1e-6) << name;
    for (int j = 0; j < run.problem.grid.size(); ++j) {
      EXPECT_GE(oracle::min_eig(lmi_block(run.problem, j, run.outcome.vf.coefficients())), -1e-6);
    }
  }
}

TEST(Synthesis, EquilibriumConditions) {
  const auto& r1 = cached_run("poly1d");
  EXPECT_LT(r1.outcome.equilibrium.value, 1e-6);
  EXPECT_LT(r1.outcome.equilibrium.gradient, 1e-6);
  EXPECT_LT(std::abs(r1.outcome.vf.hessian(Eigen::VectorXd::Zero(1))(0, 0) - 2.7320508), 1e-4);

  const auto& r2 = cached_run("radial2d");
  EXPECT_LE(r2.outcome.equilibrium.hessian, 1.0);
  const auto& rv = cached_run("vanderpol");
  EXPECT_LE(rv.outcome.equilibrium.hessian, 1.5);
  EXPECT_GT(rv.outcome.equilibrium.hessian, 0.5);

  for (const char* name : {"poly1d", "radial2d", "vanderpol"}) {
    const auto& vf = cached_run(name).outcome.vf;
    EXPECT_LT(vf.control(Eigen::VectorXd::Zero(vf.dim())).norm(), 1e-6) << name;
  }
}

TEST(Synthesis, TrivialSolutionExcludedOnlyByHessianCondition) {
  SynthesisOptions without;
  without.enforce_hessian = false;
  const SynthesisProblem free = problem_for("poly1d", without);
  const ConicProgram free_prog = to_conic(free);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(free.num_coefficients());
  EXPECT_TRUE(check_feasibility(free_prog, zero).feasible(1e-12));
  const SolveResult trivial = solve_conic(free_prog);
  EXPECT_LT(trivial.p.norm(), 1e-6);

  const SynthesisProblem pinned = problem_for("poly1d", {});
  const ConicProgram pinned_prog = to_conic(pinned);
  EXPECT_FALSE(check_feasibility(pinned_prog, zero).feasible(1e-6));
  EXPECT_GT(solve_conic(pinned_prog).p.norm(), 1e-3);
}

// Any feasible point found near a looser central-path point costs at least as much as p*.
TEST(Synthesis, LocalOptimalityAlongNullSpace) {
  SolverSettings tight, loose;
  tight.tolerance = 1e-9;
  loose.tolerance = 1e-1;
  const SynthesisProblem prob = problem_for("poly1d", {});
  const ConicProgram prog = to_conic(prob);
  const Eigen::VectorXd p = solve_conic(prog, tight).p;
  const Eigen::VectorXd interior = solve_conic(prog, loose).p;
  const Eigen::MatrixXd Z = Eigen::FullPivLU<Eigen::MatrixXd>(prog.eq_matrix).kernel();
  std::mt19937_64 rng(8);
  int feasible = 0;
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd d = Z * oracle::uniform(rng, static_cast<int>(Z.cols()), -1, 1);
    d.normalize();
    for (double lambda : {0.0, 0.25, 0.5, 0.9}) {
      for (double step : {0.0, 1e-5, -1e-5, 1e-4, -1e-4}) {
        const Eigen::VectorXd q = (1.0 - lambda) * interior + lambda * p + step * d;
        if (!check_feasibility(prog, q).feasible(1e-12)) continue;
        ++feasible;
        EXPECT_GE(q.squaredNorm(), p.squaredNorm() * (1.0 - 1e-7));
      }
    }
  }
  EXPECT_GE(feasible, 80);
}

TEST(Synthesis, LiteralOneDimensionalProblemIsInfeasible) {
  const SystemModel model = builtin_1d();
  const CenterSet centers = CenterSet::uniform_grid(Eigen::VectorXd::Constant(1, -1.5), Eigen::VectorXd::Constant(1, 1.5), {25});
  const SynthesisProblem prob = assemble(model, KernelSpec::polynomial(1, 4, 1.0), centers, CollocationGrid::same_as(centers),
                                         Eigen::MatrixXd::Constant(1, 1, 1.0 + std::sqrt(3.0)));
  try {
    synthesize(prob);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    EXPECT_NEAR(e.phase1_optimum(), 0.1023, 2e-3);
    EXPECT_FALSE(e.violations().empty());
  }
}

TEST(Synthesis, ExactVariantRecoversOptimalValue) {
  const auto& run = cached_run("poly1d_exact");
  const auto& exact = *run.prepared.model.exact;
  for (double x = -1.5; x <= 1.5; x += 0.1) {
    const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, x);
    EXPECT_NEAR(run.outcome.vf.value(v), exact.value(v), 1e-4);
  }
}

TEST(ValueFunctionProperty, TaylorRemainderIsCubic) {
  for (const char* name : {"poly1d", "radial2d", "vanderpol"}) {
    const auto& vf = cached_run(name).outcome.vf;
    const Eigen::MatrixXd H0 = vf.hessian(Eigen::VectorXd::Zero(vf.dim()));
    Eigen::VectorXd dir = Eigen::VectorXd::Ones(vf.dim()).normalized();
    auto remainder = [&](double h) {
      const Eigen::VectorXd x = h * dir;
      return std::abs(vf.value(x) - 0.5 * x.dot(H0 * x));
    };
    const double order = std::log2(remainder(0.02) / remainder(0.01));
    EXPECT_GE(order, 2.9) << name;
  }
}

TEST(ValueFunction, JsonRoundTrip) {
  const auto& run = cached_run("radial2d");
  const ValueFunction back = ValueFunction::from_json(run.outcome.vf.to_json(), run.prepared.model);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto x = oracle::uniform(rng, 2, -1.5, 1.5);
    EXPECT_EQ(back.value(x), run.outcome.vf.value(x));
    EXPECT_EQ(back.control(x), run.outcome.vf.control(x));
  }
  EXPECT_EQ(back.coefficients(), run.outcome.vf.coefficients());
  EXPECT_THROW(ValueFunction::from_json(run.outcome.vf.to_json(), builtin_1d()), InputError);
}

TEST(Assemble, InputErrors) {
  const SystemModel model = builtin_1d();
  const auto k = KernelSpec::polynomial(1, 4, 1.0);
  const CenterSet centers = CenterSet::uniform_grid(Eigen::VectorXd::Constant(1, -1.5), Eigen::VectorXd::Constant(1, 1.5), {5});
  const CollocationGrid outside = CollocationGrid::uniform_grid(Eigen::VectorXd::Constant(1, -2), Eigen::VectorXd::Constant(1, 2), {5});
  EXPECT_THROW(assemble(model, k, centers, outside, Eigen::MatrixXd::Constant(1, 1, 2.0)), InputError);
  EXPECT_THROW(assemble(model, KernelSpec::polynomial(2, 4, 1.0), centers, CollocationGrid::same_as(centers),
                        Eigen::MatrixXd::Constant(1, 1, 2.0)),
               InputError);

  const CenterSet two = CenterSet::uniform_grid(Eigen::VectorXd::Constant(1, -1), Eigen::VectorXd::Constant(1, 1), {2});
  const SynthesisProblem small = assemble(model, k, two, CollocationGrid::same_as(two), Eigen::MatrixXd::Constant(1, 1, 2.0));
  EXPECT_FALSE(small.warnings.empty());
}

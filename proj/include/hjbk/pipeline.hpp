#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hjbk/config.hpp"
#include "hjbk/riccati.hpp"
#include "hjbk/simulate.hpp"
#include "hjbk/synthesis.hpp"
#include "hjbk/verify.hpp"

namespace hjbk {

struct PreparedModel {
  SystemModel model;
  Linearization lin;
  RiccatiSolution are;
};

/// Builds the system named in the config, applies the state-cost and weight overrides, then
/// linearizes and solves the Riccati equation.
PreparedModel prepare_model(const ExperimentConfig& config);

/// Model only (no Riccati solve), for loading value functions.
SystemModel build_model(const ExperimentConfig& config);

CenterSet build_centers(const ExperimentConfig& config);
CollocationGrid build_collocation(const ExperimentConfig& config, const CenterSet& centers);

struct SynthesisRun {
  PreparedModel prepared;
  SynthesisProblem problem;
  SynthesisOutcome outcome;
};

SynthesisRun run_synthesis(const ExperimentConfig& config);

SimulationResult run_simulation(const ExperimentConfig& config, const SystemModel& model, const ValueFunction& vf);

/// Residual scans at the collocation points and on the off-grid mesh, exact comparison when
/// available and, with a batch, suboptimality rows, decay fit and the V-decrease check.
VerificationReport build_report(const ExperimentConfig& config, const SystemModel& model, const ValueFunction& vf,
                                const CollocationGrid& collocation, const SimulationResult* batch);

struct Gate {
  std::string name;
  double value = 0.0;
  std::string op;  // "<", "<=", ">", ">="
  double threshold = 0.0;
  bool soft = false;
  bool pass = false;
};

struct ReproduceOutcome {
  std::vector<Gate> gates;
  bool passed = false;
  nlohmann::json summary;  // deterministic; wall times live under "timing"
};

/// Full pipeline with the config's gates. Writes vf.json, trajectories.csv, summary.json,
/// report.json and report.txt into out_dir when it is nonempty.
ReproduceOutcome reproduce(const ExperimentConfig& config, const std::string& out_dir);

std::string gate_table(const std::vector<Gate>& gates);

nlohmann::json convergence_json(const ConvergenceStudy& study);

/// Write to a temporary sibling, then rename over the target. Creates parent directories.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace hjbk

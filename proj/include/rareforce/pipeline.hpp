#pragma once

// Glue between RunConfig and the numerical modules; each cmd_* function is
// one CLI subcommand and writes its artifacts into `out_dir`.

#include <filesystem>
#include <functional>
#include <json.hpp>
#include <memory>
#include <string>

#include "rareforce/ansatz.hpp"
#include "rareforce/config.hpp"
#include "rareforce/estimators.hpp"
#include "rareforce/milestoning.hpp"
#include "rareforce/objective.hpp"
#include "rareforce/optimizer.hpp"
#include "rareforce/reference.hpp"

namespace rareforce {

struct Experiment {
  RunConfig config;
  std::string hash;
  Model model;
  std::shared_ptr<const IntervalSet> set;
  Point x0;

  ObjectiveProblem problem() const;
  Grid1D grid() const;
};

std::shared_ptr<const Potential> make_potential(const PotentialSpec& spec);
Experiment make_experiment(const RunConfig& cfg);

/// Uniform Gaussians on the complement of S with the configured initial
/// coefficients.
GaussianAnsatz make_initial_ansatz(const Experiment& exp);

/// psi, F and the MFPT on the reference grid.
ReferenceSolution run_reference(const Experiment& exp);

/// Result of `optimize`: plain descent is a one-shell ladder.
struct OptimizeOutcome {
  CompositeValue value;
  std::vector<DescentTrace> traces;
  std::vector<double> boundary_values;
  bool converged = false;
  std::string error;
};

OptimizeOutcome run_optimize(const Experiment& exp);
/// Same with an explicit ladder (shell count k; k = 1 is plain descent).
OptimizeOutcome run_optimize(const Experiment& exp, std::size_t shells);

/// ansatz.json and the trace CSVs; returns the `optimize` exit code.
int write_optimize_artifacts(const Experiment& exp, const OptimizeOutcome& r, const std::filesystem::path& out_dir);

/// Value function and ladder from an ansatz.json document.
CompositeValue value_from_json(const nlohmann::json& doc, const Experiment& exp);

/// max over grid nodes in [lo, hi] of |(v(x) - v(grid.lo)) - F(x)|.
double value_deviation(const CompositeValue& v, const ReferenceSolution& ref, double lo, double hi);

/// MFPT at the grid nodes for the potential V + 2 F~.
std::vector<double> tilted_mfpt(const Experiment& exp, const ControlField& control, const Grid1D& grid);

/// Fixed-horizon gradient check at one coefficient vector.
nlohmann::json gradcheck_at(const Experiment& exp, const GaussianAnsatz& ansatz);

int cmd_reference(const Experiment& exp, const std::filesystem::path& out_dir);
int cmd_optimize(const Experiment& exp, const std::filesystem::path& out_dir);
int cmd_estimate(const Experiment& exp, const std::filesystem::path& out_dir);
int cmd_gradcheck(const Experiment& exp, const std::filesystem::path& out_dir);
int cmd_compare(const Experiment& exp, const std::filesystem::path& out_dir);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace rareforce

#pragma once

// Gradient descent with a Wolfe line search on a stochastic objective.
// Within one iteration every probe reuses the same noise streams (common
// random numbers), so the line search sees a deterministic function.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rareforce/objective.hpp"

namespace rareforce {

enum class ReseedPolicy { fresh_per_iteration, fixed };

struct DescentConfig {
  std::size_t max_iters = 200;
  double grad_tol = 0.05;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  double alpha_init = 1.0;
  double alpha_max = 10.0;
  double max_step_norm = 1.0;  // cap on |alpha * direction| per iteration
  std::size_t batch_size = 512;
  std::size_t max_batch_size = 16384;  // batch doubles up to this while noise hides the gradient
  ReseedPolicy reseed_policy = ReseedPolicy::fresh_per_iteration;
  std::uint64_t seed = 20120101;

  void validate() const;
};

struct LineSearchPoint {
  double value = 0.0;
  double slope = 0.0;  // directional derivative along the search direction
};

/// phi(alpha) restricted to the search ray, with fixed random numbers.
using LineFunction = std::function<LineSearchPoint(double alpha)>;

enum class LineSearchStatus { wolfe, armijo_fallback, failed };

struct LineSearchResult {
  double alpha = 0.0;
  LineSearchStatus status = LineSearchStatus::failed;
  std::size_t evaluations = 0;
};

/// Bracketing + zoom search for a step satisfying the Armijo (c1) and
/// curvature (c2) conditions; after 20 zoom steps falls back to Armijo
/// backtracking, and failing that returns alpha_init/10 with status failed.
/// Throws std::invalid_argument unless at_zero.slope < 0.
LineSearchResult wolfe_line_search(const LineFunction& phi, LineSearchPoint at_zero, const DescentConfig& cfg);

struct DescentRecord {
  std::size_t iteration = 0;
  Eigen::VectorXd coefficients;
  double cost = 0.0;
  double cost_stderr = 0.0;
  double grad_norm = 0.0;
  double grad_stderr = 0.0;
  double alpha = 0.0;  // step taken from this iterate (0 at the last one)
  double mean_steps = 0.0;
  std::size_t batch_size = 0;
  std::size_t n_censored = 0;
  LineSearchStatus line_search = LineSearchStatus::wolfe;
};

struct DescentTrace {
  std::vector<DescentRecord> records;
  bool converged = false;
  bool non_converging = false;  // smoothed cost increased before termination
  std::size_t best_index = 0;

  void write_csv(std::ostream& os, const std::string& config_hash = {}) const;
};

/// Objective evaluated at coefficients `a` on `batch` paths keyed by `seed`.
using StochasticObjective =
    std::function<GradientEstimate(const Eigen::VectorXd& a, std::uint64_t seed, std::size_t batch)>;

struct DescentResult {
  Eigen::VectorXd coefficients;  // best seen by cost value
  DescentTrace trace;
};

/// Called with each finished record (progress reporting).
using DescentObserver = std::function<void(const DescentRecord&)>;

/// Iterates a <- a - alpha grad until |grad| < grad_tol, or |grad| < 2 *
/// gradient stderr at max_batch_size, or max_iters. While |grad| is below
/// 2 stderr but above grad_tol the batch size doubles and the same point is
/// evaluated again (a record with alpha = 0). A non-finite estimate throws
/// NumericalError.
DescentResult descend(const Eigen::VectorXd& a0, const DescentConfig& cfg, const StochasticObjective& objective,
                      const DescentObserver& observer = {});

/// StochasticObjective backed by estimate_inexact_gradient on `problem`
/// with `ansatz` geometry and mask.
StochasticObjective make_inexact_objective(const GaussianAnsatz& ansatz, const ObjectiveProblem& problem);

}  // namespace rareforce

#pragma once

// Monte-Carlo estimates of the discretized control cost
//
//   I_h(a) = E_Q[ h sum_{k<N} ( f(x_k) + |c(x_k)|^2 / 2 ) ]
//
// and of its gradient in the ansatz coefficients, by the likelihood-ratio
// (score function) method on the Euler path density.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "rareforce/ansatz.hpp"
#include "rareforce/dynamics.hpp"
#include "rareforce/model.hpp"

namespace rareforce {

struct ObjectiveProblem {
  Model model;
  Point x0;
  SimConfig sim;
  /// Optional cost added at the stopping point (milestoning terminal value).
  std::function<double(std::span<const double>)> terminal_cost;
  /// If set, states whose first coordinate exceeds the edge are steered by
  /// the control at the edge (milestoning shells, whose basis functions say
  /// nothing about the region further out).
  std::optional<double> control_edge;
};

struct CostEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
  double mean_steps = 0.0;
};

struct GradientEstimate {
  double value = 0.0;
  Eigen::VectorXd gradient;
  double value_stderr = 0.0;
  Eigen::VectorXd gradient_stderr;
  std::size_t n_paths = 0;
  std::size_t n_censored = 0;
  double mean_steps = 0.0;

  /// sqrt(sum_j stderr_j^2), the Monte-Carlo error of the gradient norm.
  double aggregate_stderr() const { return gradient_stderr.norm(); }
};

/// Batch mean of work + control cost (+ terminal cost) under the control of
/// `ansatz`; throws if any path fails to hit within max_steps.
CostEstimate estimate_cost(const GaussianAnsatz& ansatz, const ObjectiveProblem& problem);

/// Gradient with the stopping-time boundary terms dropped:
///   dI/da_j = h E[sum c.b_j] + sqrt(h/eps) Cov[G, sum eta_{k+1}.b_j(x_k)]
/// with G the accumulated path cost. Non-hitting paths are excluded and
/// counted in n_censored. Masked coefficients get a zero component.
GradientEstimate estimate_inexact_gradient(const GaussianAnsatz& ansatz, const ObjectiveProblem& problem);

/// Exact gradient E[dg/da_j] - Cov[G, dS_h/da_j] on the fixed horizon
/// T = N h (stopping set ignored), with dS_h/da_j taken from the discrete
/// action. Used to validate the inexact estimator.
GradientEstimate estimate_exact_gradient_fixed_horizon(const GaussianAnsatz& ansatz,
                                                       const ObjectiveProblem& problem, double horizon);

/// Per-path costs for the batch defined by problem.sim (seed, batch_size).
/// With a horizon, paths run exactly horizon/h steps. Non-hitting paths
/// yield NaN.
std::vector<double> cost_samples(const GaussianAnsatz& ansatz, const ObjectiveProblem& problem,
                                 std::optional<double> horizon = std::nullopt);

/// Number of Euler steps in a fixed horizon; throws unless horizon/h is an
/// integer up to rounding.
std::size_t horizon_steps(double horizon, double h);

}  // namespace rareforce

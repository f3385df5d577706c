#pragma once

// Shell-by-shell solution of the control problem on nested sets
// S_0 = S subset S_1 subset ... subset S_K (1D: S_i = [S.lo, r_i]).
// Shell i owns the Gaussians centered in (r_i, r_{i+1}]. Its coefficients
// are optimized with paths that stop on entering S_i and pay the value of
// the inner shells' Gaussians there as terminal cost; the inner
// coefficients stay frozen but still shape the control.

#include <Eigen/Dense>
#include <json.hpp>
#include <string>
#include <vector>

#include "rareforce/ansatz.hpp"
#include "rareforce/objective.hpp"
#include "rareforce/optimizer.hpp"

namespace rareforce {

struct MilestoneLadder {
  double set_lo = 0.0;                         // left edge of S_0
  std::vector<double> thresholds;              // r_0 < r_1 < ... < r_K
  std::vector<std::vector<std::size_t>> shells;  // basis indices owned by each shell

  std::size_t shell_count() const { return shells.size(); }
  /// Shell whose interval (r_i, r_{i+1}] holds x, clamped to [0, K-1].
  std::size_t shell_of(double x) const;
  /// S_i as an interval.
  IntervalSet stopping_set(std::size_t i) const;
  std::vector<bool> mask(std::size_t i, std::size_t m) const;
  /// Basis functions of shells 0..i.
  std::vector<bool> mask_through(std::size_t i, std::size_t m) const;
  void validate() const;
};

/// k shells with thresholds uniformly spaced from s0.hi() to domain.hi.
/// Throws if k == 0, k exceeds the basis count, or any shell gets no basis
/// function.
MilestoneLadder build_ladder(const IntervalSet& s0, const SimulationDomain& domain, std::size_t k,
                             const GaussianAnsatz& ansatz);

/// Same with explicit intermediate thresholds r_1 < ... < r_{K-1}, strictly
/// inside (s0.hi(), domain.hi).
MilestoneLadder build_ladder(const IntervalSet& s0, const SimulationDomain& domain,
                             const std::vector<double>& inner_thresholds, const GaussianAnsatz& ansatz);

/// Sum of the Gaussians of shells 0..last (all shells by default), shifted
/// to vanish at r_0. The control is -sqrt(2) times its derivative.
class CompositeValue final : public ControlField {
 public:
  CompositeValue(GaussianAnsatz ansatz, MilestoneLadder ladder);
  CompositeValue(GaussianAnsatz ansatz, MilestoneLadder ladder, std::size_t last);

  std::size_t dimension() const override { return 1; }
  double value(std::span<const double> x) const;
  double value(double x) const { return value(std::span<const double>(&x, 1)); }
  void evaluate(std::span<const double> x, std::span<double> out) const override;

  const GaussianAnsatz& ansatz() const { return ansatz_; }
  const MilestoneLadder& ladder() const { return ladder_; }

 private:
  GaussianAnsatz ansatz_;
  MilestoneLadder ladder_;
  GaussianAnsatz active_;
  double offset_ = 0.0;
};

/// Optimizes the coefficients of shell i with the inner shells frozen at
/// the values in `ansatz`. Paths start at x0 when x0 lies in the shell and
/// at r_{i+1} otherwise; beyond r_{i+1} they feel the control at r_{i+1}.
/// Returns the full coefficient vector.
DescentResult solve_shell(std::size_t i, const MilestoneLadder& ladder, const GaussianAnsatz& ansatz,
                          const ObjectiveProblem& problem, const DescentConfig& cfg);

struct MilestoningResult {
  GaussianAnsatz ansatz;               // union of the shell coefficients
  MilestoneLadder ladder;
  std::vector<DescentTrace> traces;    // one per solved shell
  std::vector<double> boundary_values;  // F~ on dS_i as seen by shell i (the terminal cost), i = 0..K
  std::vector<double> shell_costs;     // best estimated cost per shell
  bool complete = false;
  std::string error;                   // set when a shell failed

  CompositeValue value() const { return CompositeValue(ansatz, ladder); }
  /// Mean Euler steps per path over every iteration of every shell.
  double mean_steps() const;
};

/// Solves shells 0..K-1 in order starting from the coefficients in
/// `initial`. A failing shell stops the loop; the result then carries the
/// shells solved so far and the error message.
MilestoningResult run_milestoning(const MilestoneLadder& ladder, const GaussianAnsatz& initial,
                                  const ObjectiveProblem& problem, const DescentConfig& cfg);

nlohmann::json ladder_to_json(const MilestoneLadder& ladder);
MilestoneLadder ladder_from_json(const nlohmann::json& j);

}  // namespace rareforce

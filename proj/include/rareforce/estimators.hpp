#pragma once

// Importance-sampling estimators of psi = E_P[exp(-W/eps)] and E_P[tau]
// from paths of the controlled dynamics, reweighted by dP/dQ.

#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "rareforce/dynamics.hpp"
#include "rareforce/model.hpp"

namespace rareforce {

struct EstimatorResult {
  double estimate = 0.0;
  double std_error = 0.0;
  std::pair<double, double> ci95{0.0, 0.0};
  std::size_t n_paths = 0;
  double ess = 0.0;
  double min_weight = 0.0;
  double max_weight = 0.0;
  bool degenerate = false;  // ess below max(0.01 n, 2)

  double variance() const;  // sample variance of the per-path statistic
  bool covers(double value) const { return ci95.first <= value && value <= ci95.second; }
};

/// Mean of w_i y_i with its standard error, 1.96-sigma interval and
/// ESS = (sum w)^2 / sum w^2. Throws std::invalid_argument for n < 2.
EstimatorResult summarize(const std::vector<double>& samples, const std::vector<double>& weights);
EstimatorResult summarize(const std::vector<double>& samples);

/// Per-path draws under the control; censored paths are a hard error.
struct WeightedPaths {
  std::vector<double> work;
  std::vector<double> weight;  // exp(log dP/dQ)
  std::vector<double> tau;     // h * n_tau
};

WeightedPaths sample_weighted_paths(const ControlField& control, const Model& model, std::span<const double> x0,
                                    const SimConfig& sim, std::size_t n_paths);

struct PsiEstimate {
  EstimatorResult psi;
  double free_energy = 0.0;  // -eps log psi
  double free_energy_stderr = 0.0;
};

/// psi_sigma(x0) for the model's observable from paths tilted by `control`.
PsiEstimate estimate_psi_reweighted(const ControlField& control, const Model& model, std::span<const double> x0,
                                    const SimConfig& sim, std::size_t n_paths);

/// E_P[tau] from paths tilted by `control`. Exactly zero when x0 is in the
/// stopping set.
EstimatorResult estimate_mfpt_reweighted(const ControlField& control, const Model& model,
                                         std::span<const double> x0, const SimConfig& sim, std::size_t n_paths);

nlohmann::json estimate_to_json(const std::string& quantity, std::span<const double> x0, const EstimatorResult& r,
                                const std::string& config_hash);

}  // namespace rareforce

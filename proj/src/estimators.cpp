#include "rareforce/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <iostream>
#include <stdexcept>

namespace rareforce {

double EstimatorResult::variance() const {
  return std_error * std_error * static_cast<double>(n_paths);
}

EstimatorResult summarize(const std::vector<double>& samples, const std::vector<double>& weights) {
  if (samples.size() != weights.size()) throw std::invalid_argument("samples and weights differ in length");
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("summarize needs at least two samples");
  const double nd = static_cast<double>(n);

  EstimatorResult r;
  r.n_paths = n;
  double mean = 0.0, sw = 0.0, sw2 = 0.0;
  r.min_weight = weights.front();
  r.max_weight = weights.front();
  for (std::size_t i = 0; i < n; ++i) {
    mean += weights[i] * samples[i];
    sw += weights[i];
    sw2 += weights[i] * weights[i];
    r.min_weight = std::min(r.min_weight, weights[i]);
    r.max_weight = std::max(r.max_weight, weights[i]);
  }
  mean /= nd;
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = weights[i] * samples[i] - mean;
    var += d * d;
  }
  var /= nd - 1.0;
  r.estimate = mean;
  r.std_error = std::sqrt(var / nd);
  r.ci95 = {mean - 1.96 * r.std_error, mean + 1.96 * r.std_error};
  r.ess = sw2 > 0.0 ? sw * sw / sw2 : 0.0;
  r.degenerate = r.ess < std::max(0.01 * nd, 2.0);
  return r;
}

EstimatorResult summarize(const std::vector<double>& samples) {
  return summarize(samples, std::vector<double>(samples.size(), 1.0));
}

WeightedPaths sample_weighted_paths(const ControlField& control, const Model& model, std::span<const double> x0,
                                    const SimConfig& sim, std::size_t n_paths) {
  sim.validate();
  WeightedPaths out;
  out.work.resize(n_paths);
  out.weight.resize(n_paths);
  out.tau.resize(n_paths);
  parallel_for(n_paths, sim.workers, [&](std::size_t i) {
    PathRng rng(sim.seed, i);
    const Trajectory t = simulate_until_hit(x0, control, model, sim, rng);
    if (!t.hit) {
      throw std::runtime_error(fmt::format("path {} did not hit the stopping set within {} steps", i, sim.max_steps));
    }
    out.work[i] = t.work;
    out.weight[i] = std::exp(t.log_lr_p_over_q);
    out.tau[i] = t.duration(sim.h);
  });
  return out;
}

namespace {

void warn_if_degenerate(const char* what, const EstimatorResult& r) {
  if (r.degenerate) {
    std::cerr << fmt::format("warning: {} weights are degenerate (ess {:.3g} of {} paths)\n", what, r.ess, r.n_paths);
  }
}

EstimatorResult exact(double value, std::size_t n) {
  EstimatorResult r;
  r.estimate = value;
  r.ci95 = {value, value};
  r.n_paths = n;
  r.ess = static_cast<double>(n);
  r.min_weight = r.max_weight = 1.0;
  return r;
}

}  // namespace

PsiEstimate estimate_psi_reweighted(const ControlField& control, const Model& model, std::span<const double> x0,
                                    const SimConfig& sim, std::size_t n_paths) {
  PsiEstimate out;
  if (model.stopping_set->contains(x0)) {
    out.psi = exact(1.0, n_paths);
    return out;
  }
  const WeightedPaths paths = sample_weighted_paths(control, model, x0, sim, n_paths);
  std::vector<double> y(n_paths);
  for (std::size_t i = 0; i < n_paths; ++i) y[i] = std::exp(-paths.work[i] / sim.epsilon);
  out.psi = summarize(y, paths.weight);
  warn_if_degenerate("psi", out.psi);
  if (!(out.psi.estimate > 0.0)) throw NumericalError("psi estimate is not positive");
  out.free_energy = -sim.epsilon * std::log(out.psi.estimate);
  out.free_energy_stderr = sim.epsilon * out.psi.std_error / out.psi.estimate;
  return out;
}

EstimatorResult estimate_mfpt_reweighted(const ControlField& control, const Model& model,
                                         std::span<const double> x0, const SimConfig& sim, std::size_t n_paths) {
  if (model.stopping_set->contains(x0)) return exact(0.0, n_paths);
  const WeightedPaths paths = sample_weighted_paths(control, model, x0, sim, n_paths);
  EstimatorResult r = summarize(paths.tau, paths.weight);
  warn_if_degenerate("mfpt", r);
  return r;
}

nlohmann::json estimate_to_json(const std::string& quantity, std::span<const double> x0, const EstimatorResult& r,
                                const std::string& config_hash) {
  nlohmann::json j;
  j["quantity"] = quantity;
  j["x0"] = std::vector<double>(x0.begin(), x0.end());
  j["estimate"] = r.estimate;
  j["stderr"] = r.std_error;
  j["ci95"] = {r.ci95.first, r.ci95.second};
  j["n"] = r.n_paths;
  j["ess"] = r.ess;
  j["min_weight"] = r.min_weight;
  j["max_weight"] = r.max_weight;
  j["degenerate"] = r.degenerate;
  j["config_hash"] = config_hash;
  return j;
}

}  // namespace rareforce

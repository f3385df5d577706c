#include "rareforce/milestoning.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <limits>
#include <numbers>

namespace rareforce {

std::size_t MilestoneLadder::shell_of(double x) const {
  const std::size_t k = shell_count();
  for (std::size_t i = 1; i < k; ++i) {
    if (x <= thresholds[i]) return i - 1;
  }
  return k - 1;
}

IntervalSet MilestoneLadder::stopping_set(std::size_t i) const { return IntervalSet(set_lo, thresholds.at(i)); }

std::vector<bool> MilestoneLadder::mask(std::size_t i, std::size_t m) const {
  std::vector<bool> out(m, false);
  for (std::size_t j : shells.at(i)) out.at(j) = true;
  return out;
}

std::vector<bool> MilestoneLadder::mask_through(std::size_t i, std::size_t m) const {
  std::vector<bool> out(m, false);
  for (std::size_t s = 0; s <= i; ++s) {
    for (std::size_t j : shells.at(s)) out.at(j) = true;
  }
  return out;
}

void MilestoneLadder::validate() const {
  if (shells.empty() || thresholds.size() != shells.size() + 1) {
    throw std::invalid_argument("ladder needs K shells and K+1 thresholds");
  }
  if (!(set_lo < thresholds.front())) throw std::invalid_argument("S_0 must have positive width");
  for (std::size_t i = 0; i + 1 < thresholds.size(); ++i) {
    if (!(thresholds[i] < thresholds[i + 1])) throw std::invalid_argument("ladder thresholds must increase strictly");
  }
  for (std::size_t i = 0; i < shells.size(); ++i) {
    if (shells[i].empty()) throw std::invalid_argument(fmt::format("shell {} has no basis functions", i));
  }
}

namespace {

MilestoneLadder assign_shells(const IntervalSet& s0, std::vector<double> thresholds, const GaussianAnsatz& ansatz) {
  if (ansatz.dimension() != 1) throw std::invalid_argument("milestoning is implemented for 1D models");
  MilestoneLadder ladder;
  ladder.set_lo = s0.lo();
  ladder.thresholds = std::move(thresholds);
  const std::size_t k = ladder.thresholds.size() - 1;
  if (k > ansatz.size()) {
    throw std::invalid_argument(fmt::format("{} shells but only {} basis functions", k, ansatz.size()));
  }
  ladder.shells.assign(k, {});
  for (std::size_t j = 0; j < ansatz.size(); ++j) {
    const double mu = ansatz.center(j)[0];
    if (mu < ladder.thresholds.front() || mu > ladder.thresholds.back()) continue;
    ladder.shells[ladder.shell_of(mu)].push_back(j);
  }
  ladder.validate();
  return ladder;
}

}  // namespace

MilestoneLadder build_ladder(const IntervalSet& s0, const SimulationDomain& domain, std::size_t k,
                             const GaussianAnsatz& ansatz) {
  if (k == 0) throw std::invalid_argument("ladder needs at least one shell");
  const double r0 = s0.hi();
  const double rk = domain.hi.at(0);
  if (!(r0 < rk)) throw std::invalid_argument("domain does not extend past the stopping set");
  std::vector<double> r(k + 1);
  for (std::size_t i = 0; i <= k; ++i) r[i] = r0 + (rk - r0) * static_cast<double>(i) / static_cast<double>(k);
  r[k] = rk;
  return assign_shells(s0, std::move(r), ansatz);
}

MilestoneLadder build_ladder(const IntervalSet& s0, const SimulationDomain& domain,
                             const std::vector<double>& inner_thresholds, const GaussianAnsatz& ansatz) {
  std::vector<double> r;
  r.push_back(s0.hi());
  for (double t : inner_thresholds) {
    if (!(t > s0.hi() && t < domain.hi.at(0))) {
      throw std::invalid_argument(fmt::format("threshold {} outside ({}, {})", t, s0.hi(), domain.hi.at(0)));
    }
    r.push_back(t);
  }
  r.push_back(domain.hi.at(0));
  return assign_shells(s0, std::move(r), ansatz);
}

CompositeValue::CompositeValue(GaussianAnsatz ansatz, MilestoneLadder ladder)
    : CompositeValue(std::move(ansatz), std::move(ladder), std::numeric_limits<std::size_t>::max()) {}

CompositeValue::CompositeValue(GaussianAnsatz ansatz, MilestoneLadder ladder, std::size_t last)
    : ansatz_(std::move(ansatz)), ladder_(std::move(ladder)) {
  ladder_.validate();
  active_ = ansatz_;
  active_.set_mask(ladder_.mask_through(std::min(last, ladder_.shell_count() - 1), ansatz_.size()));
  const double r0 = ladder_.thresholds.front();
  offset_ = -active_.value(std::span<const double>(&r0, 1));
}

double CompositeValue::value(std::span<const double> x) const { return active_.value(x) + offset_; }

void CompositeValue::evaluate(std::span<const double> x, std::span<double> out) const { active_.evaluate(x, out); }

DescentResult solve_shell(std::size_t i, const MilestoneLadder& ladder, const GaussianAnsatz& ansatz,
                          const ObjectiveProblem& problem, const DescentConfig& cfg) {
  ladder.validate();
  if (i >= ladder.shell_count()) throw std::out_of_range("shell index out of range");

  ObjectiveProblem shell = problem;
  shell.model.stopping_set = std::make_shared<IntervalSet>(ladder.stopping_set(i));
  const double x0 = problem.x0.at(0);
  const bool owns_start = x0 > ladder.thresholds[i] && x0 <= ladder.thresholds[i + 1];
  shell.x0 = {owns_start ? x0 : ladder.thresholds[i + 1]};
  if (i + 1 < ladder.shell_count()) shell.control_edge = ladder.thresholds[i + 1];
  if (i > 0) {
    auto inner = std::make_shared<const CompositeValue>(ansatz, ladder, i - 1);
    shell.terminal_cost = [inner](std::span<const double> x) { return inner->value(x); };
  }

  GaussianAnsatz local = ansatz;
  local.set_mask(ladder.mask_through(i, ansatz.size()));
  const std::vector<bool> own = ladder.mask(i, ansatz.size());
  StochasticObjective full = make_inexact_objective(local, shell);
  // Frozen inner coefficients steer the paths but are not descended on.
  StochasticObjective objective = [full, own](const Eigen::VectorXd& a, std::uint64_t seed, std::size_t batch) {
    GradientEstimate est = full(a, seed, batch);
    for (std::size_t j = 0; j < own.size(); ++j) {
      if (own[j]) continue;
      est.gradient[static_cast<Eigen::Index>(j)] = 0.0;
      est.gradient_stderr[static_cast<Eigen::Index>(j)] = 0.0;
    }
    return est;
  };
  DescentConfig shell_cfg = cfg;
  if (i > 0) shell_cfg.seed = derive_seed(cfg.seed, 0x5be11000 + i);
  return descend(ansatz.coefficients(), shell_cfg, objective);
}

double MilestoningResult::mean_steps() const {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& t : traces) {
    for (const auto& r : t.records) {
      total += r.mean_steps;
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

MilestoningResult run_milestoning(const MilestoneLadder& ladder, const GaussianAnsatz& initial,
                                  const ObjectiveProblem& problem, const DescentConfig& cfg) {
  ladder.validate();
  MilestoningResult out;
  out.ansatz = initial;
  out.ladder = ladder;
  out.boundary_values.push_back(0.0);
  for (std::size_t i = 0; i < ladder.shell_count(); ++i) {
    try {
      DescentResult r = solve_shell(i, ladder, out.ansatz, problem, cfg);
      out.ansatz.set_coefficients(r.coefficients);
      out.shell_costs.push_back(r.trace.records.at(r.trace.best_index).cost);
      out.traces.push_back(std::move(r.trace));
    } catch (const std::exception& e) {
      out.error = fmt::format("shell {}: {}", i, e.what());
      break;
    }
    // What shell i+1 will pay on reaching r_{i+1}.
    out.boundary_values.push_back(CompositeValue(out.ansatz, ladder, i).value(ladder.thresholds[i + 1]));
  }
  out.complete = out.error.empty();
  return out;
}

nlohmann::json ladder_to_json(const MilestoneLadder& ladder) {
  return {{"set_lo", ladder.set_lo}, {"thresholds", ladder.thresholds}, {"shells", ladder.shells}};
}

MilestoneLadder ladder_from_json(const nlohmann::json& j) {
  MilestoneLadder l;
  l.set_lo = j.at("set_lo").get<double>();
  l.thresholds = j.at("thresholds").get<std::vector<double>>();
  l.shells = j.at("shells").get<std::vector<std::vector<std::size_t>>>();
  l.validate();
  return l;
}

}  // namespace rareforce

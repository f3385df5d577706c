#include "rareforce/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <iostream>
#include <limits>
#include <ostream>

namespace rareforce {

void DescentConfig::validate() const {
  if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0)) {
    throw std::invalid_argument("Wolfe constants must satisfy 0 < c1 < c2 < 1");
  }
  if (!(alpha_init > 0.0 && alpha_max > 0.0 && max_step_norm > 0.0)) throw std::invalid_argument("step bounds must be positive");
  if (max_iters == 0) throw std::invalid_argument("max_iters must be positive");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be positive");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be at least 2");
  if (max_batch_size < batch_size) throw std::invalid_argument("max_batch_size must be at least batch_size");
}

LineSearchResult wolfe_line_search(const LineFunction& phi, LineSearchPoint at_zero, const DescentConfig& cfg) {
  const double f0 = at_zero.value;
  const double g0 = at_zero.slope;
  if (!(g0 < 0.0)) throw std::invalid_argument("line search direction is not a descent direction");

  LineSearchResult result;
  auto eval = [&](double a) {
    ++result.evaluations;
    return phi(a);
  };
  auto armijo = [&](double a, const LineSearchPoint& p) {
    return std::isfinite(p.value) && p.value <= f0 + cfg.wolfe_c1 * a * g0;
  };
  auto curvature = [&](const LineSearchPoint& p) { return std::isfinite(p.slope) && p.slope >= cfg.wolfe_c2 * g0; };

  // Bracketing phase: grow alpha until Armijo fails or curvature holds.
  double lo = 0.0, hi = 0.0;
  LineSearchPoint p_lo = at_zero, p_hi;
  double a = std::min(cfg.alpha_init, cfg.alpha_max);
  bool bracketed = false;
  for (int i = 0; i < 60; ++i) {
    const LineSearchPoint p = eval(a);
    if (!armijo(a, p) || (i > 0 && p.value >= p_lo.value)) {
      hi = a;
      p_hi = p;
      bracketed = true;
      break;
    }
    if (curvature(p)) {
      result.alpha = a;
      result.status = LineSearchStatus::wolfe;
      return result;
    }
    lo = a;
    p_lo = p;
    if (a >= cfg.alpha_max) {
      result.alpha = a;
      result.status = LineSearchStatus::armijo_fallback;
      return result;
    }
    a = std::min(2.0 * a, cfg.alpha_max);
  }

  if (bracketed) {
    for (int it = 0; it < 20; ++it) {
      const double width = hi - lo;
      double trial = 0.5 * (lo + hi);
      // Quadratic model from value and slope at lo and the value at hi.
      if (std::isfinite(p_hi.value)) {
        const double denom = 2.0 * (p_hi.value - p_lo.value - p_lo.slope * width);
        if (denom > 0.0) trial = lo - p_lo.slope * width * width / denom;
      }
      trial = std::clamp(trial, lo + 0.1 * width, hi - 0.1 * width);
      const LineSearchPoint p = eval(trial);
      if (!armijo(trial, p) || p.value >= p_lo.value) {
        hi = trial;
        p_hi = p;
      } else {
        if (curvature(p)) {
          result.alpha = trial;
          result.status = LineSearchStatus::wolfe;
          return result;
        }
        lo = trial;
        p_lo = p;
      }
    }
  }

  // Zoom failed; settle for sufficient decrease.
  if (lo > 0.0) {
    result.alpha = lo;
    result.status = LineSearchStatus::armijo_fallback;
    return result;
  }
  a = cfg.alpha_init;
  for (int it = 0; it < 10; ++it) {
    a *= 0.5;
    if (armijo(a, eval(a))) {
      result.alpha = a;
      result.status = LineSearchStatus::armijo_fallback;
      return result;
    }
  }
  result.alpha = cfg.alpha_init / 10.0;
  result.status = LineSearchStatus::failed;
  return result;
}

void DescentTrace::write_csv(std::ostream& os, const std::string& config_hash) const {
  if (!config_hash.empty()) os << "# config_hash: " << config_hash << "\n";
  const std::size_t m = records.empty() ? 0 : static_cast<std::size_t>(records.front().coefficients.size());
  os << "iteration,cost,grad_norm,alpha,stderr,batch";
  for (std::size_t j = 0; j < m; ++j) os << ",a" << j;
  os << "\n";
  for (const auto& r : records) {
    fmt::print(os, "{},{:.17g},{:.17g},{:.17g},{:.17g},{}", r.iteration, r.cost, r.grad_norm, r.alpha, r.cost_stderr,
               r.batch_size);
    for (Eigen::Index j = 0; j < r.coefficients.size(); ++j) fmt::print(os, ",{:.17g}", r.coefficients[j]);
    os << "\n";
  }
}

namespace {

// Flags an increase of the 5-iteration moving average beyond its noise.
bool smoothed_cost_increases(const std::vector<DescentRecord>& recs) {
  constexpr std::size_t w = 5;
  if (recs.size() < w + 1) return false;
  auto window = [&](std::size_t end, double& se) {
    double s = 0.0, v = 0.0;
    for (std::size_t i = end - w; i < end; ++i) {
      s += recs[i].cost;
      v += recs[i].cost_stderr * recs[i].cost_stderr;
    }
    se = std::sqrt(v) / w;
    return s / w;
  };
  for (std::size_t end = w + 1; end <= recs.size(); ++end) {
    double se_prev = 0.0, se_cur = 0.0;
    const double prev = window(end - 1, se_prev);
    const double cur = window(end, se_cur);
    if (cur > prev + 2.0 * std::hypot(se_prev, se_cur)) return true;
  }
  return false;
}

}  // namespace

DescentResult descend(const Eigen::VectorXd& a0, const DescentConfig& cfg, const StochasticObjective& objective,
                      const DescentObserver& observer) {
  cfg.validate();
  if (!a0.allFinite()) throw std::invalid_argument("initial coefficients must be finite");

  DescentResult out;
  Eigen::VectorXd a = a0;
  double best_cost = std::numeric_limits<double>::infinity();
  std::size_t batch = cfg.batch_size;

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const std::uint64_t seed =
        cfg.reseed_policy == ReseedPolicy::fixed ? cfg.seed : derive_seed(cfg.seed, it);
    const GradientEstimate est = objective(a, seed, batch);
    if (!std::isfinite(est.value) || !est.gradient.allFinite()) {
      throw NumericalError(fmt::format("non-finite cost or gradient at iteration {}", it));
    }
    if (est.n_censored > 0) {
      std::cerr << fmt::format("warning: iteration {}: {} of {} paths censored (max_steps reached)\n", it,
                               est.n_censored, est.n_censored + est.n_paths);
    }

    DescentRecord rec;
    rec.iteration = it;
    rec.coefficients = a;
    rec.cost = est.value;
    rec.cost_stderr = est.value_stderr;
    rec.grad_norm = est.gradient.norm();
    rec.grad_stderr = est.aggregate_stderr();
    rec.mean_steps = est.mean_steps;
    rec.batch_size = batch;
    rec.n_censored = est.n_censored;

    if (est.value < best_cost) {
      best_cost = est.value;
      out.coefficients = a;
      out.trace.best_index = out.trace.records.size();
    }

    const bool small = rec.grad_norm < cfg.grad_tol;
    const bool hidden = rec.grad_norm < 2.0 * rec.grad_stderr;
    if (small || (hidden && batch >= cfg.max_batch_size)) {
      if (observer) observer(rec);
      out.trace.records.push_back(rec);
      out.trace.converged = true;
      break;
    }
    if (it + 1 == cfg.max_iters) {
      if (observer) observer(rec);
      out.trace.records.push_back(rec);
      break;
    }

    if (hidden) {
      // The gradient is within noise: resolve it with a larger batch first.
      batch = std::min(2 * batch, cfg.max_batch_size);
      if (observer) observer(rec);
      out.trace.records.push_back(rec);
      continue;
    }

    const Eigen::VectorXd direction = -est.gradient;
    // Probes that censor paths or blow up count as infinitely expensive.
    LineFunction phi = [&](double alpha) {
      try {
        const GradientEstimate e = objective(a + alpha * direction, seed, batch);
        if (e.n_censored == 0) return LineSearchPoint{e.value, e.gradient.dot(direction)};
      } catch (const std::exception&) {
      }
      return LineSearchPoint{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::quiet_NaN()};
    };
    DescentConfig step_cfg = cfg;
    step_cfg.alpha_max = std::min(cfg.alpha_max, cfg.max_step_norm / direction.norm());
    step_cfg.alpha_init = std::min(cfg.alpha_init, step_cfg.alpha_max);
    const LineSearchResult ls = wolfe_line_search(phi, {est.value, -est.gradient.squaredNorm()}, step_cfg);
    if (ls.status == LineSearchStatus::failed) {
      std::cerr << fmt::format("warning: iteration {}: line search failed, using alpha={}\n", it, ls.alpha);
    }
    rec.alpha = ls.alpha;
    rec.line_search = ls.status;
    if (observer) observer(rec);
    out.trace.records.push_back(rec);

    a += ls.alpha * direction;
    if (!a.allFinite()) {
      out.trace.non_converging = true;
      throw NumericalError(fmt::format("descent produced non-finite coefficients at iteration {}", it));
    }
  }
  out.trace.non_converging = smoothed_cost_increases(out.trace.records);
  return out;
}

StochasticObjective make_inexact_objective(const GaussianAnsatz& ansatz, const ObjectiveProblem& problem) {
  GaussianAnsatz local = ansatz;
  ObjectiveProblem prob = problem;
  return [local, prob](const Eigen::VectorXd& a, std::uint64_t seed, std::size_t batch) mutable {
    local.set_coefficients(a);
    prob.sim.seed = seed;
    prob.sim.batch_size = batch;
    return estimate_inexact_gradient(local, prob);
  };
}

}  // namespace rareforce

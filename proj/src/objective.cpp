#include "rareforce/objective.hpp"

#include <cmath>
#include <numbers>

namespace rareforce {

std::size_t horizon_steps(double horizon, double h) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  const double n = horizon / h;
  const double rounded = std::round(n);
  if (rounded < 1.0 || std::abs(n - rounded) > 1e-9 * std::max(1.0, n)) {
    throw std::invalid_argument("horizon must be an integer multiple of h");
  }
  return static_cast<std::size_t>(rounded);
}

namespace {

// Per-path sums needed by the gradient estimators.
struct PathSums {
  double cost = 0.0;           // G: work + control cost (+ terminal)
  std::vector<double> dg;      // h sum_k c(x_k).b_j(x_k)
  std::vector<double> score;   // estimator-specific second factor
  std::size_t steps = 0;
  bool hit = false;
};

// Evaluates the basis once per step and shares it between the control and
// the per-step accumulation.
class BasisController {
 public:
  BasisController(const GaussianAnsatz& ansatz, std::optional<double> edge)
      : ansatz_(ansatz), edge_(edge), v_(ansatz.size()), b_(ansatz.size() * ansatz.dimension()),
        clamped_(ansatz.dimension()) {}

  void operator()(std::span<const double> x, std::span<double> c) {
    if (edge_ && x[0] > *edge_) {
      std::copy(x.begin(), x.end(), clamped_.begin());
      clamped_[0] = *edge_;
      x = clamped_;
    }
    ansatz_.basis(x, v_, b_);
    const std::size_t dim = ansatz_.dimension();
    std::fill(c.begin(), c.end(), 0.0);
    const double* a = ansatz_.coefficients().data();
    for (std::size_t j = 0; j < ansatz_.size(); ++j) {
      for (std::size_t i = 0; i < dim; ++i) c[i] += a[j] * b_[j * dim + i];
    }
  }

  /// b_j at the state most recently passed to operator(), row-major m x dim.
  const double* b() const { return b_.data(); }

 private:
  const GaussianAnsatz& ansatz_;
  std::optional<double> edge_;
  std::vector<double> v_;
  std::vector<double> b_;
  Point clamped_;
};

enum class ScoreForm { noise, action };

PathSums run_gradient_path(const GaussianAnsatz& ansatz, const ObjectiveProblem& problem,
                           std::size_t index, std::optional<std::size_t> fixed_steps, ScoreForm form) {
  const SimConfig& cfg = problem.sim;
  const std::size_t m = ansatz.size();
  const std::size_t dim = ansatz.dimension();
  PathSums sums;
  sums.dg.assign(m, 0.0);
  sums.score.assign(m, 0.0);

  BasisController controller(ansatz, problem.control_edge);
  Point grad(dim), residual(dim);
  const double action_scale = -cfg.h / (cfg.epsilon * std::numbers::sqrt2);
  const double diffusion = std::sqrt(2.0 * cfg.h * cfg.epsilon);

  auto hook = [&](std::span<const double> x, std::span<const double> c, std::span<const double> eta) {
    if (form == ScoreForm::action) {
      // Residual of the action at the (pre-boundary) Euler proposal.
      problem.model.potential->gradient(x, grad);
      for (std::size_t i = 0; i < dim; ++i) {
        const double drift = std::numbers::sqrt2 * c[i] - grad[i];
        const double proposal = x[i] + cfg.h * drift + diffusion * eta[i];
        residual[i] = action_scale * ((proposal - x[i]) / cfg.h + grad[i] - std::numbers::sqrt2 * c[i]);
      }
    }
    const std::span<const double> w = form == ScoreForm::noise ? eta : std::span<const double>(residual);
    // Masked basis functions have b_j = 0, so no mask test is needed here.
    const double* b = controller.b();
    if (dim == 1) {
      const double hc = cfg.h * c[0], w0 = w[0];
      for (std::size_t j = 0; j < m; ++j) {
        sums.dg[j] += hc * b[j];
        sums.score[j] += w0 * b[j];
      }
      return;
    }
    for (std::size_t j = 0; j < m; ++j) {
      double cb = 0.0, wb = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        cb += b[j * dim + i] * c[i];
        wb += b[j * dim + i] * w[i];
      }
      sums.dg[j] += cfg.h * cb;
      sums.score[j] += wb;
    }
  };

  PathRng rng(cfg.seed, index);
  PathLimits limits;
  if (fixed_steps) {
    limits.max_steps = *fixed_steps;
  } else {
    limits.stop = problem.model.stopping_set.get();
    limits.max_steps = cfg.max_steps;
  }
  Trajectory traj = simulate_path(problem.x0, controller, problem.model, cfg, rng, limits, hook);
  sums.cost = traj.work + traj.control_cost;
  sums.hit = fixed_steps.has_value() || traj.hit;
  if (problem.terminal_cost && sums.hit) sums.cost += problem.terminal_cost(traj.final_state);
  sums.steps = traj.n_tau;
  return sums;
}

// Combines the per-path sums into E[dg] + kappa * Cov[G, score].
GradientEstimate reduce(const GaussianAnsatz& ansatz, const std::vector<PathSums>& paths, double kappa) {
  const std::size_t m = ansatz.size();
  GradientEstimate est;
  est.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  est.gradient_stderr = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));

  std::vector<const PathSums*> used;
  for (const auto& p : paths) {
    if (p.hit) used.push_back(&p); else ++est.n_censored;
  }
  est.n_paths = used.size();
  if (used.size() < 2) throw std::runtime_error("fewer than two uncensored paths in the batch");
  const double n = static_cast<double>(used.size());

  double cost_mean = 0.0, steps = 0.0;
  for (const auto* p : used) {
    cost_mean += p->cost;
    steps += static_cast<double>(p->steps);
  }
  cost_mean /= n;
  est.value = cost_mean;
  est.mean_steps = steps / n;
  double cost_var = 0.0;
  for (const auto* p : used) cost_var += (p->cost - cost_mean) * (p->cost - cost_mean);
  cost_var /= n - 1.0;
  est.value_stderr = std::sqrt(cost_var / n);

  for (std::size_t j = 0; j < m; ++j) {
    if (!ansatz.active(j)) continue;
    double score_mean = 0.0;
    for (const auto* p : used) score_mean += p->score[j];
    score_mean /= n;
    // Per-path contribution whose mean is the estimator (mean-free covariance).
    std::vector<double> y(used.size());
    double ymean = 0.0;
    for (std::size_t q = 0; q < used.size(); ++q) {
      const auto* p = used[q];
      y[q] = p->dg[j] + kappa * (p->cost - cost_mean) * (p->score[j] - score_mean) * n / (n - 1.0);
      ymean += y[q];
    }
    ymean /= n;
    double yvar = 0.0;
    for (double v : y) yvar += (v - ymean) * (v - ymean);
    yvar /= n - 1.0;
    est.gradient[static_cast<Eigen::Index>(j)] = ymean;
    est.gradient_stderr[static_cast<Eigen::Index>(j)] = std::sqrt(yvar / n);
  }
  return est;
}

std::vector<PathSums> run_batch(const GaussianAnsatz& ansatz, const ObjectiveProblem& problem,
                                std::optional<std::size_t> fixed_steps, ScoreForm form) {
  problem.sim.validate();
  std::vector<PathSums> paths(problem.sim.batch_size);
  parallel_for(paths.size(), problem.sim.workers, [&](std::size_t i) {
    paths[i] = run_gradient_path(ansatz, problem, i, fixed_steps, form);
  });
  return paths;
}

}  // namespace

std::vector<double> cost_samples(const GaussianAnsatz& ansatz, const ObjectiveProblem& problem,
                                 std::optional<double> horizon) {
  problem.sim.validate();
  std::optional<std::size_t> steps;
  if (horizon) steps = horizon_steps(*horizon, problem.sim.h);
  PathLimits limits;
  if (steps) {
    limits.max_steps = *steps;
  } else {
    limits.stop = problem.model.stopping_set.get();
    limits.max_steps = problem.sim.max_steps;
  }
  std::vector<double> out(problem.sim.batch_size);
  parallel_for(out.size(), problem.sim.workers, [&](std::size_t i) {
    PathRng rng(problem.sim.seed, i);
    BasisController control(ansatz, problem.control_edge);
    auto hook = [](std::span<const double>, std::span<const double>, std::span<const double>) {};
    Trajectory t = simulate_path(problem.x0, control, problem.model, problem.sim, rng, limits, hook);
    const bool ok = steps.has_value() || t.hit;
    double cost = t.work + t.control_cost;
    if (ok && problem.terminal_cost) cost += problem.terminal_cost(t.final_state);
    out[i] = ok ? cost : std::numeric_limits<double>::quiet_NaN();
  });
  return out;
}

CostEstimate estimate_cost(const GaussianAnsatz& ansatz, const ObjectiveProblem& problem) {
  problem.sim.validate();
  std::vector<double> costs(problem.sim.batch_size);
  std::vector<std::size_t> steps(problem.sim.batch_size);
  parallel_for(costs.size(), problem.sim.workers, [&](std::size_t i) {
    PathRng rng(problem.sim.seed, i);
    BasisController control(ansatz, problem.control_edge);
    PathLimits limits;
    limits.stop = problem.model.stopping_set.get();
    limits.max_steps = problem.sim.max_steps;
    auto hook = [](std::span<const double>, std::span<const double>, std::span<const double>) {};
    Trajectory t = simulate_path(problem.x0, control, problem.model, problem.sim, rng, limits, hook);
    if (!t.hit) throw std::runtime_error("path did not hit the stopping set within max_steps; cost estimate would be biased");
    costs[i] = t.work + t.control_cost;
    if (problem.terminal_cost) costs[i] += problem.terminal_cost(t.final_state);
    steps[i] = t.n_tau;
  });
  if (costs.size() < 2) throw std::invalid_argument("cost estimate needs at least two paths");
  CostEstimate est;
  est.n_paths = costs.size();
  const double n = static_cast<double>(costs.size());
  double mean = 0.0, st = 0.0;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    mean += costs[i];
    st += static_cast<double>(steps[i]);
  }
  mean /= n;
  double var = 0.0;
  for (double c : costs) var += (c - mean) * (c - mean);
  var /= n - 1.0;
  est.value = mean;
  est.std_error = std::sqrt(var / n);
  est.mean_steps = st / n;
  return est;
}

GradientEstimate estimate_inexact_gradient(const GaussianAnsatz& ansatz, const ObjectiveProblem& problem) {
  const auto paths = run_batch(ansatz, problem, std::nullopt, ScoreForm::noise);
  // Cov[G, -dS/da_j] with dS/da_j = -sqrt(h/eps) sum eta_{k+1}.b_j(x_k).
  const double kappa = std::sqrt(problem.sim.h / problem.sim.epsilon);
  return reduce(ansatz, paths, kappa);
}

GradientEstimate estimate_exact_gradient_fixed_horizon(const GaussianAnsatz& ansatz,
                                                       const ObjectiveProblem& problem, double horizon) {
  const std::size_t steps = horizon_steps(horizon, problem.sim.h);
  const auto paths = run_batch(ansatz, problem, steps, ScoreForm::action);
  // Scores hold dS_h/da_j directly, hence the minus sign.
  return reduce(ansatz, paths, -1.0);
}

}  // namespace rareforce

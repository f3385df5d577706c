#include "rareforce/dynamics.hpp"

#include <fmt/format.h>

namespace rareforce {

void SimConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(h > 0.0)) throw std::invalid_argument("time step h must be positive");
  if (max_steps == 0) throw std::invalid_argument("max_steps must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
}

PathRng::PathRng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5eedu};
  engine_.seed(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void apply_boundary(const SimulationDomain& domain, std::span<double> x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lo = domain.lo[i];
    const double hi = domain.hi[i];
    if (lo <= x[i] && x[i] <= hi) continue;
    if (domain.boundary == BoundaryBehavior::abort) {
      throw DomainError(fmt::format("path left the domain: x[{}]={} not in [{}, {}]", i, x[i], lo, hi));
    }
    // Fold back; a few passes cover steps longer than the box.
    for (int pass = 0; pass < 8 && !(lo <= x[i] && x[i] <= hi); ++pass) {
      if (x[i] > hi) x[i] = 2.0 * hi - x[i];
      if (x[i] < lo) x[i] = 2.0 * lo - x[i];
    }
    if (!(lo <= x[i] && x[i] <= hi)) {
      throw DomainError(fmt::format("reflection failed to bring x[{}]={} back into the domain", i, x[i]));
    }
  }
}

void em_step(std::span<const double> x, std::span<const double> control_value,
             std::span<const double> noise, const SimConfig& cfg, const Potential& p,
             const SimulationDomain& domain, std::span<double> out) {
  const std::size_t dim = x.size();
  // out doubles as scratch for the gradient.
  p.gradient(x, out);
  const double diffusion = std::sqrt(2.0 * cfg.h * cfg.epsilon);
  for (std::size_t i = 0; i < dim; ++i) {
    out[i] = x[i] + cfg.h * (std::sqrt(2.0) * control_value[i] - out[i]) + diffusion * noise[i];
    if (!std::isfinite(out[i])) {
      throw NumericalError(fmt::format("non-finite Euler-Maruyama update from x[{}]={} (c={}, eta={}, h={})",
                                       i, x[i], control_value[i], noise[i], cfg.h));
    }
  }
  apply_boundary(domain, out);
}

Point em_step(std::span<const double> x, std::span<const double> control_value,
              std::span<const double> noise, const SimConfig& cfg, const Potential& p,
              const SimulationDomain& domain) {
  Point out(x.size());
  em_step(x, control_value, noise, cfg, p, domain, out);
  return out;
}

namespace {

struct NoHook {
  void operator()(std::span<const double>, std::span<const double>, std::span<const double>) const {}
};

auto as_callable(const ControlField& control) {
  return [&control](std::span<const double> x, std::span<double> c) { control.evaluate(x, c); };
}

}  // namespace

Trajectory simulate_until_hit(std::span<const double> x0, const ControlField& control,
                              const Model& model, const SimConfig& cfg, PathRng& rng,
                              bool store_path) {
  PathLimits limits{model.stopping_set.get(), cfg.max_steps, store_path};
  return simulate_path(x0, as_callable(control), model, cfg, rng, limits, NoHook{});
}

Trajectory simulate_fixed_horizon(std::span<const double> x0, const ControlField& control,
                                  const Model& model, const SimConfig& cfg, std::size_t steps,
                                  PathRng& rng, bool store_path) {
  PathLimits limits{nullptr, steps, store_path};
  return simulate_path(x0, as_callable(control), model, cfg, rng, limits, NoHook{});
}

namespace {

void check_stored(const Trajectory& traj) {
  const std::size_t dim = traj.dimension;
  if (traj.states.size() != (traj.n_tau + 1) * dim || traj.noises.size() != traj.n_tau * dim) {
    throw std::invalid_argument("trajectory storage does not match n_tau");
  }
}

}  // namespace

double discrete_action(const Trajectory& traj, const ControlField& control, const SimConfig& cfg,
                       const Potential& p) {
  check_stored(traj);
  const std::size_t dim = traj.dimension;
  if (control.dimension() != dim || p.dimension() != dim) {
    throw std::invalid_argument("dimension mismatch between trajectory, control and potential");
  }
  Point c(dim), grad(dim);
  double sum = 0.0;
  for (std::size_t k = 0; k < traj.n_tau; ++k) {
    std::span<const double> xk(traj.states.data() + k * dim, dim);
    std::span<const double> xk1(traj.states.data() + (k + 1) * dim, dim);
    control.evaluate(xk, c);
    p.gradient(xk, grad);
    for (std::size_t i = 0; i < dim; ++i) {
      const double r = (xk1[i] - xk[i]) / cfg.h + grad[i] - std::sqrt(2.0) * c[i];
      sum += r * r;
    }
  }
  return cfg.h / (4.0 * cfg.epsilon) * sum;
}

double log_likelihood_ratio(const Trajectory& traj, const ControlField& control,
                            const SimConfig& cfg, const Potential& p) {
  return discrete_action(traj, control, cfg, p) -
         discrete_action(traj, ZeroControl(traj.dimension), cfg, p);
}

}  // namespace rareforce

#pragma once

// Euler-Maruyama simulation of the controlled overdamped Langevin equation
//
//   dX = (sqrt(2) c(X) - grad V(X)) dt + sqrt(2 eps) dB
//
// up to the first entry into a stopping set, with per-path accumulation of
// the work, the quadratic control cost and log(dP/dQ).

#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "rareforce/model.hpp"

namespace rareforce {

struct SimConfig {
  double epsilon = 0.5;
  double h = 1e-3;
  std::size_t max_steps = 1'000'000;
  std::uint64_t seed = 20120101;
  std::size_t batch_size = 512;
  unsigned workers = 1;

  void validate() const;
};

/// Feedback control c: R^n -> R^n.
class ControlField {
 public:
  virtual ~ControlField() = default;
  virtual std::size_t dimension() const = 0;
  virtual void evaluate(std::span<const double> x, std::span<double> out) const = 0;
};

class ZeroControl final : public ControlField {
 public:
  explicit ZeroControl(std::size_t dim = 1) : dim_(dim) {}
  std::size_t dimension() const override { return dim_; }
  void evaluate(std::span<const double>, std::span<double> out) const override {
    for (double& v : out) v = 0.0;
  }

 private:
  std::size_t dim_;
};

/// Independent normal stream keyed by (master seed, path index), so a batch
/// gives the same paths no matter how it is split across workers.
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t stream);

  double normal() { return normal_(engine_); }
  void normals(std::span<double> out) {
    for (double& v : out) v = normal_(engine_);
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// splitmix64-style mixing, used to derive per-iteration seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

struct Trajectory {
  std::size_t dimension = 1;
  /// x_0..x_{n_tau}, row-major, only filled when the path was stored.
  std::vector<double> states;
  /// eta_1..eta_{n_tau}, only filled when the path was stored.
  std::vector<double> noises;
  std::size_t n_tau = 0;
  double work = 0.0;          // h * sum_{k<n_tau} f(x_k)
  double control_cost = 0.0;  // h * sum_{k<n_tau} |c(x_k)|^2 / 2
  double log_lr_p_over_q = 0.0;
  bool hit = false;
  Point final_state;

  bool stored() const { return !states.empty(); }
  double duration(double h) const { return h * static_cast<double>(n_tau); }
};

/// One Euler-Maruyama step; the result is folded back into the domain
/// (reflect) or rejected (abort).
void em_step(std::span<const double> x, std::span<const double> control_value,
             std::span<const double> noise, const SimConfig& cfg, const Potential& p,
             const SimulationDomain& domain, std::span<double> out);

Point em_step(std::span<const double> x, std::span<const double> control_value,
              std::span<const double> noise, const SimConfig& cfg, const Potential& p,
              const SimulationDomain& domain);

void apply_boundary(const SimulationDomain& domain, std::span<double> x);

struct PathLimits {
  const StoppingSet* stop = nullptr;  // nullptr: run exactly max_steps steps
  std::size_t max_steps = 0;
  bool store_path = false;
};

/// Core simulation loop. `control(x, c)` fills the control at x; `hook(x, c,
/// noise)` is called once per step with the state before the update.
template <class Control, class Hook>
Trajectory simulate_path(std::span<const double> x0, Control&& control, const Model& model,
                         const SimConfig& cfg, PathRng& rng, const PathLimits& limits,
                         Hook&& hook) {
  const std::size_t dim = model.dimension();
  Trajectory traj;
  traj.dimension = dim;
  Point x(x0.begin(), x0.end());
  Point c(dim, 0.0), noise(dim, 0.0), next(dim, 0.0);

  if (limits.stop != nullptr && limits.stop->contains(x)) {
    throw std::invalid_argument("start point lies inside the stopping set");
  }
  if (!model.domain.contains(x)) throw DomainError("start point lies outside the simulation domain");

  const double lr_noise = std::sqrt(cfg.h / cfg.epsilon);
  const double lr_drift = cfg.h / (2.0 * cfg.epsilon);
  if (limits.store_path) traj.states.insert(traj.states.end(), x.begin(), x.end());

  std::size_t k = 0;
  while (k < limits.max_steps) {
    control(std::span<const double>(x), std::span<double>(c));
    rng.normals(noise);

    double c2 = 0.0, c_eta = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      c2 += c[i] * c[i];
      c_eta += c[i] * noise[i];
    }
    traj.work += cfg.h * model.observable(x);
    traj.control_cost += 0.5 * cfg.h * c2;
    traj.log_lr_p_over_q += -lr_noise * c_eta - lr_drift * c2;

    hook(std::span<const double>(x), std::span<const double>(c), std::span<const double>(noise));
    em_step(x, c, noise, cfg, *model.potential, model.domain, next);
    x.swap(next);
    ++k;

    if (limits.store_path) {
      traj.states.insert(traj.states.end(), x.begin(), x.end());
      traj.noises.insert(traj.noises.end(), noise.begin(), noise.end());
    }
    if (limits.stop != nullptr && limits.stop->contains(x)) {
      traj.hit = true;
      break;
    }
  }
  traj.n_tau = k;
  traj.final_state = std::move(x);
  return traj;
}

/// Simulates until the first entry into the model's stopping set or
/// cfg.max_steps (hit == false).
Trajectory simulate_until_hit(std::span<const double> x0, const ControlField& control,
                              const Model& model, const SimConfig& cfg, PathRng& rng,
                              bool store_path = false);

/// Simulates exactly `steps` steps, ignoring the stopping set.
Trajectory simulate_fixed_horizon(std::span<const double> x0, const ControlField& control,
                                  const Model& model, const SimConfig& cfg, std::size_t steps,
                                  PathRng& rng, bool store_path = false);

/// S_h = h/(4 eps) sum_k |(x_{k+1}-x_k)/h + grad V(x_k) - sqrt(2) c(x_k)|^2
/// on a stored path, for an arbitrary control.
double discrete_action(const Trajectory& traj, const ControlField& control, const SimConfig& cfg,
                       const Potential& p);

/// log(dP_h/dQ_h) = S_h(path; control) - S_h(path; 0) on a stored path.
double log_likelihood_ratio(const Trajectory& traj, const ControlField& control,
                            const SimConfig& cfg, const Potential& p);

/// Runs fn(i) for i in [0, n) on `workers` threads. Each index is handled by
/// exactly one thread; the first exception is rethrown after all joined.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t nw = std::min<std::size_t>(workers, n);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (std::size_t w = 0; w < nw; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += nw) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace rareforce

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rareforce/dynamics.hpp"
#include "rareforce/estimators.hpp"
#include "support.hpp"

using namespace rareforce;

namespace {

Model free_model(double lo = -10.0, double hi = 10.0) {
  Model m;
  m.potential = std::make_shared<FreePotential>(1);
  m.observable = Observable::constant(1.0);
  m.stopping_set = std::make_shared<IntervalSet>(lo + 1.0, lo + 2.0);
  m.domain = SimulationDomain::interval(lo, hi);
  return m;
}

double step1(double x, double c, double eta, const SimConfig& cfg, const Potential& p, const SimulationDomain& d) {
  return em_step(std::span<const double>(&x, 1), std::span<const double>(&c, 1), std::span<const double>(&eta, 1), cfg,
                 p, d)[0];
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("Euler-Maruyama step") {
    SimConfig cfg;
    cfg.h = 0.01;
    cfg.epsilon = 0.5;
    const FreePotential free;
    const auto dom = SimulationDomain::interval(-5.0, 5.0);
    CHECK(step1(0.0, 0.0, 0.0, cfg, free, dom) == 0.0);
    CHECK(step1(0.0, 0.0, 1.0, cfg, free, dom) == doctest::Approx(0.1).epsilon(1e-14));
    const auto v = make_skew_double_well();
    // grad V(1) = 1/4
    CHECK(step1(1.0, 0.0, 0.0, cfg, *v, dom) == doctest::Approx(0.9975).epsilon(1e-14));
    // control enters as sqrt(2) c
    CHECK(step1(0.0, 1.0, 0.0, cfg, free, dom) == doctest::Approx(0.01 * std::numbers::sqrt2));
  }

  TEST_CASE("reflecting and aborting boundaries") {
    SimConfig cfg;
    cfg.h = 0.01;
    cfg.epsilon = 0.5;
    const FreePotential free;
    // 0.95 + 0.1 * 1.5 = 1.1 folds back to 0.9
    CHECK(step1(0.95, 0.0, 1.5, cfg, free, SimulationDomain::interval(0.0, 1.0)) == doctest::Approx(0.9));
    CHECK(step1(0.05, 0.0, -1.5, cfg, free, SimulationDomain::interval(0.0, 1.0)) == doctest::Approx(0.1));
    CHECK_THROWS_AS(step1(0.95, 0.0, 1.5, cfg, free, SimulationDomain::interval(0.0, 1.0, BoundaryBehavior::abort)),
                    DomainError);
  }

  TEST_CASE("non-finite update is a numerical error") {
    SimConfig cfg;
    const FreePotential free;
    CHECK_THROWS_AS(step1(0.0, std::nan(""), 0.0, cfg, free, SimulationDomain::interval(-1.0, 1.0)), NumericalError);
  }

  TEST_CASE("discrete action, hand-evaluated single step") {
    SimConfig cfg;
    cfg.h = 0.01;
    cfg.epsilon = 0.5;
    Trajectory t;
    t.states = {0.0, 0.1};  // grad V(0) = 0.25 for the skew double well
    t.noises = {0.0};
    t.n_tau = 1;
    // (0.01 / 2) * (10 + 0.25)^2
    CHECK(discrete_action(t, ZeroControl(1), cfg, *make_skew_double_well()) ==
          doctest::Approx(0.5253125).epsilon(1e-13));
    Trajectory bad = t;
    bad.n_tau = 2;
    CHECK_THROWS(discrete_action(bad, ZeroControl(1), cfg, *make_skew_double_well()));
  }

  TEST_CASE("log likelihood ratio, hand-evaluated single step") {
    SimConfig cfg;
    cfg.h = 0.01;
    cfg.epsilon = 0.5;
    const FreePotential free;
    const testing::FunctionControl one([](double) { return 1.0; });
    Trajectory t;
    const double x1 = step1(0.0, 1.0, 0.2, cfg, free, SimulationDomain::interval(-5.0, 5.0));
    t.states = {0.0, x1};
    t.noises = {0.2};
    t.n_tau = 1;
    // -sqrt(h/eps) c eta - h/(2 eps) c^2 = -sqrt(0.02) 0.2 - 0.01
    CHECK(log_likelihood_ratio(t, one, cfg, free) == doctest::Approx(-0.0382842712474619).epsilon(1e-12));
    CHECK(log_likelihood_ratio(t, ZeroControl(1), cfg, free) == 0.0);
  }

  TEST_CASE("path bookkeeping matches post-hoc action") {
    Model m = testing::skew_model();
    SimConfig cfg;
    cfg.h = 1e-3;
    const testing::FunctionControl c([](double x) { return 0.7 * std::sin(3.0 * x) - 0.4; });
    const double x0 = 0.2;
    PathRng rng(11, 3);
    const Trajectory t = simulate_until_hit(std::span<const double>(&x0, 1), c, m, cfg, rng, true);
    REQUIRE(t.hit);
    CHECK(t.states.size() == t.n_tau + 1);
    CHECK(t.noises.size() == t.n_tau);
    for (std::size_t k = 0; k < t.n_tau; ++k) CHECK_FALSE(m.stopping_set->contains(std::span<const double>(&t.states[k], 1)));
    CHECK(m.stopping_set->contains(std::span<const double>(&t.states.back(), 1)));
    CHECK(t.work == doctest::Approx(cfg.h * static_cast<double>(t.n_tau)));

    // Under its own control the residual is sqrt(2 h eps) eta, so S_h = |eta|^2 / 2,
    // provided no reflection happened (the path stays well inside [-1.5, 2]).
    double half_eta2 = 0.0;
    for (double e : t.noises) half_eta2 += 0.5 * e * e;
    CHECK(discrete_action(t, c, cfg, *m.potential) == doctest::Approx(half_eta2).epsilon(1e-9));
    const double lr = log_likelihood_ratio(t, c, cfg, *m.potential);
    CHECK(lr == doctest::Approx(discrete_action(t, c, cfg, *m.potential) -
                                discrete_action(t, ZeroControl(1), cfg, *m.potential))
                    .epsilon(1e-9));
    CHECK(t.log_lr_p_over_q == doctest::Approx(lr).epsilon(1e-9));
  }

  TEST_CASE("zero control gives a unit likelihood ratio") {
    Model m = testing::skew_model();
    SimConfig cfg;
    const double x0 = 0.0;
    for (std::uint64_t i = 0; i < 20; ++i) {
      PathRng rng(5, i);
      const Trajectory t = simulate_until_hit(std::span<const double>(&x0, 1), ZeroControl(1), m, cfg, rng);
      CHECK(t.log_lr_p_over_q == 0.0);
      CHECK(t.control_cost == 0.0);
    }
  }

  TEST_CASE("start point inside the stopping set is rejected") {
    Model m = testing::skew_model();
    SimConfig cfg;
    const double x0 = -1.05;
    PathRng rng(1, 0);
    CHECK_THROWS_AS(simulate_until_hit(std::span<const double>(&x0, 1), ZeroControl(1), m, cfg, rng),
                    std::invalid_argument);
  }

  TEST_CASE("free diffusion hits a nearby set") {
    Model m;
    m.potential = std::make_shared<FreePotential>(1);
    m.stopping_set = std::make_shared<IntervalSet>(-0.1, 0.1);
    m.domain = SimulationDomain::interval(-1.0, 1.0);
    SimConfig cfg;
    cfg.max_steps = 1'000'000;
    const double x0 = 0.5;
    int hits = 0;
    for (std::uint64_t i = 0; i < 200; ++i) {
      PathRng rng(3, i);
      hits += simulate_until_hit(std::span<const double>(&x0, 1), ZeroControl(1), m, cfg, rng).hit ? 1 : 0;
    }
    CHECK(hits == 200);
  }

  TEST_CASE("likelihood ratio is a martingale") {
    // E_Q[dP/dQ] = 1 on a fixed horizon.
    Model m = free_model();
    SimConfig cfg;
    cfg.h = 1e-2;
    const testing::FunctionControl c([](double x) { return std::cos(2.0 * x); });
    const double x0 = 0.0;
    std::vector<double> w;
    for (std::uint64_t i = 0; i < 4000; ++i) {
      PathRng rng(17, i);
      w.push_back(std::exp(simulate_fixed_horizon(std::span<const double>(&x0, 1), c, m, cfg, 100, rng).log_lr_p_over_q));
    }
    const EstimatorResult r = summarize(w);
    CHECK(std::abs(r.estimate - 1.0) < 3.0 * r.std_error);
  }

  TEST_CASE("reweighting reproduces expectations under P") {
    // Phi = 1{X_T > 0.3} for the harmonic potential, T = 1.
    Model m = free_model();
    m.potential = std::make_shared<HarmonicPotential>(1, 1.0, 0.0);
    SimConfig cfg;
    cfg.h = 1e-2;
    const testing::FunctionControl c([](double x) { return 0.5 - 0.3 * x; });
    const double x0 = 0.0;
    std::vector<double> tilted, weights, plain;
    for (std::uint64_t i = 0; i < 4000; ++i) {
      PathRng rq(23, i), rp(29, i);
      const Trajectory tq = simulate_fixed_horizon(std::span<const double>(&x0, 1), c, m, cfg, 100, rq);
      const Trajectory tp = simulate_fixed_horizon(std::span<const double>(&x0, 1), ZeroControl(1), m, cfg, 100, rp);
      tilted.push_back(tq.final_state[0] > 0.3 ? 1.0 : 0.0);
      weights.push_back(std::exp(tq.log_lr_p_over_q));
      plain.push_back(tp.final_state[0] > 0.3 ? 1.0 : 0.0);
    }
    const EstimatorResult q = summarize(tilted, weights);
    const EstimatorResult p = summarize(plain);
    CHECK(std::abs(q.estimate - p.estimate) < 3.0 * std::hypot(q.std_error, p.std_error));
  }

  TEST_CASE("zero-variance structure under the optimal control") {
    // Exact optimal control for V=0 on [0, L] with sigma=1, eps=1/2:
    // psi = cosh(k(L-x))/cosh(kL), k = sqrt(sigma)/eps, c = -sqrt(2) F' = sqrt(2) eps psi'/psi.
    const double eps = 0.5, L = 2.0, k = 1.0 / eps;
    Model m;
    m.potential = std::make_shared<FreePotential>(1);
    m.observable = Observable::constant(1.0);
    m.stopping_set = std::make_shared<IntervalSet>(-0.5, 0.0);
    m.domain = SimulationDomain::interval(-1.0, L);
    const testing::FunctionControl c([&](double x) { return -std::numbers::sqrt2 * eps * k * std::tanh(k * (L - x)); });
    const double x0 = 1.0;
    const double psi = std::cosh(k * (L - x0)) / std::cosh(k * L);
    double prev_sd = std::numeric_limits<double>::infinity();
    double prev_bias = std::numeric_limits<double>::infinity();
    for (double h : {4e-3, 2e-3, 1e-3}) {
      SimConfig cfg;
      cfg.h = h;
      cfg.epsilon = eps;
      cfg.seed = 41;
      const PsiEstimate est = estimate_psi_reweighted(c, m, std::span<const double>(&x0, 1), cfg, 2000);
      const double sd = est.psi.std_error * std::sqrt(2000.0);
      CHECK(sd < prev_sd);
      prev_sd = sd;
      // What is left is the bias of the discrete hitting time, which shrinks with h.
      const double bias = std::abs(est.psi.estimate - psi);
      CHECK(bias < prev_bias);
      prev_bias = bias;
      if (h == 1e-3) CHECK(bias < 0.05 * psi);
    }
  }

  TEST_CASE("batches are independent of the worker count") {
    Model m = testing::skew_model();
    SimConfig cfg;
    cfg.seed = 99;
    const testing::FunctionControl c([](double x) { return -0.8 * (x + 1.0); });
    const double x0 = 0.5;
    cfg.workers = 1;
    const WeightedPaths a = sample_weighted_paths(c, m, std::span<const double>(&x0, 1), cfg, 64);
    cfg.workers = 4;
    const WeightedPaths b = sample_weighted_paths(c, m, std::span<const double>(&x0, 1), cfg, 64);
    CHECK(a.work == b.work);
    CHECK(a.weight == b.weight);
    CHECK(a.tau == b.tau);
  }

  TEST_CASE("derived seeds") {
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
    PathRng a(5, 0), b(5, 0), c(5, 1);
    const double x = a.normal();
    CHECK(x == b.normal());
    CHECK(x != c.normal());
  }

  TEST_CASE("config validation") {
    SimConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.h = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = SimConfig{};
    cfg.epsilon = -1.0;
    CHECK_THROWS(cfg.validate());
  }
}

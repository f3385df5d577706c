#include <doctest.h>

#include <random>

#include "rareforce/model.hpp"
#include "support.hpp"

using namespace rareforce;

TEST_SUITE("model") {
  TEST_CASE("skew double well values") {
    const auto v = make_skew_double_well();
    const double zero = 0.0;
    // (0-1)^2 + 0 = 1; the gradient 4x(x^2-1) + 1/4 is 1/4 at the origin.
    CHECK(v->value(std::span<const double>(&zero, 1)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(v->gradient(std::span<const double>(&zero, 1))[0] == doctest::Approx(0.25).epsilon(1e-15));
    const double one = 1.0;
    CHECK(v->value(std::span<const double>(&one, 1)) == doctest::Approx(0.25));
  }

  TEST_CASE("eval_model bundles energy, gradient and running cost") {
    const auto v = make_skew_double_well();
    const auto dom = SimulationDomain::interval(-1.5, 2.0);
    const double x = 0.0;
    const ModelEval e = eval_model(*v, Observable::constant(1.0), dom, std::span<const double>(&x, 1));
    CHECK(e.energy == doctest::Approx(1.0));
    CHECK(e.grad[0] == doctest::Approx(0.25));
    CHECK(e.cost == 1.0);

    const double y = 1.7;
    CHECK(eval_model(*v, Observable::constant(0.0), dom, std::span<const double>(&y, 1)).cost == 0.0);

    FreePotential free;
    const double z = 0.3;
    const ModelEval f = eval_model(free, Observable::constant(0.7), dom, std::span<const double>(&z, 1));
    CHECK(f.energy == 0.0);
    CHECK(f.grad[0] == 0.0);
    CHECK(f.cost == 0.7);

    const double outside = 2.5;
    CHECK_THROWS_AS(eval_model(*v, Observable::constant(1.0), dom, std::span<const double>(&outside, 1)), DomainError);
  }

  TEST_CASE("observables") {
    const Observable c = Observable::constant(2.5);
    const double x = -0.3;
    CHECK(c(std::span<const double>(&x, 1)) == 2.5);
    CHECK(c.kind() == Observable::Kind::constant);
    const Observable g = Observable::general([](std::span<const double> p) { return p[0] * p[0]; });
    CHECK(g(std::span<const double>(&x, 1)) == doctest::Approx(0.09));
    CHECK(g.kind() == Observable::Kind::general);
    CHECK_THROWS(Observable::general({}));
  }

  TEST_CASE("stopping sets are closed") {
    const IntervalSet s(-1.1, -1.0);
    auto hit = [&](double x) { return is_hit(s, std::span<const double>(&x, 1)); };
    CHECK(hit(-1.05));
    CHECK(hit(-1.0));
    CHECK(hit(-1.1));
    CHECK_FALSE(hit(-0.999));
    CHECK_FALSE(hit(-1.2));
    CHECK_THROWS(IntervalSet(0.0, 0.0));

    const BallSet b({0.0, 0.0}, 0.5);
    const double in[] = {0.3, 0.4};
    const double out[] = {0.3, 0.41};
    CHECK(b.contains(in));
    CHECK_FALSE(b.contains(out));
  }

  TEST_CASE("analytic gradients match central differences") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.5, 2.0);
    const std::vector<std::shared_ptr<const Potential>> pots = {
        make_skew_double_well(), std::make_shared<FreePotential>(1),
        std::make_shared<HarmonicPotential>(1, 2.0, 0.3)};
    const double step = 1e-5;
    for (const auto& p : pots) {
      for (int k = 0; k < 100; ++k) {
        const double x = u(rng);
        const double xp = x + step, xm = x - step;
        const double fd = (p->value(std::span<const double>(&xp, 1)) - p->value(std::span<const double>(&xm, 1))) /
                          (2.0 * step);
        const double g = p->gradient(std::span<const double>(&x, 1))[0];
        // Relative error, with an absolute floor near stationary points.
        CHECK(std::abs(fd - g) <= 1e-5 * std::max(std::abs(g), 1e-2));
      }
    }
  }

  TEST_CASE("two minima and one barrier on [-1.5, 1.5]") {
    const auto v = make_skew_double_well();
    const auto minima = local_minima_1d(*v, -1.5, 1.5);
    const auto maxima = local_maxima_1d(*v, -1.5, 1.5);
    REQUIRE(minima.size() == 2);
    REQUIRE(maxima.size() == 1);
    CHECK(minima[0] == doctest::Approx(-1.03).epsilon(0.01));
    CHECK(minima[1] == doctest::Approx(testing::kX0).epsilon(1e-9));
    CHECK(std::abs(maxima[0]) < 0.1);
  }

  TEST_CASE("model validation") {
    Model m = testing::skew_model();
    CHECK_NOTHROW(m.validate());
    m.stopping_set = std::make_shared<IntervalSet>(-1.6, -1.0);
    CHECK_THROWS(m.validate());
    CHECK_THROWS(SimulationDomain::interval(1.0, 0.0).validate());
  }
}

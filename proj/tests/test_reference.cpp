#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "rareforce/reference.hpp"
#include "support.hpp"

using namespace rareforce;

namespace {

std::vector<double> closed_form_psi(const Grid1D& g, double sigma, double eps) {
  const double k = std::sqrt(sigma) / eps, L = g.hi - g.lo;
  std::vector<double> out;
  for (double x : g.nodes()) out.push_back(std::cosh(k * (L - (x - g.lo))) / std::cosh(k * L));
  return out;
}

}  // namespace

TEST_SUITE("reference") {
  TEST_CASE("no running cost means psi is one") {
    const Grid1D g = Grid1D::with_spacing(-1.0, 2.0, 1e-2);
    const ReferenceSolution sol = solve_fk(*make_skew_double_well(), 0.0, 0.5, g);
    for (std::size_t i = 0; i < g.n; ++i) {
      CHECK(sol.psi[i] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(sol.free_energy[i]) < 1e-12);
    }
  }

  TEST_CASE("free diffusion, closed form at eps = 1") {
    const Grid1D g = Grid1D::with_spacing(0.0, 2.0, 1e-3);
    const FreePotential free;
    for (double sigma : {0.5, 1.0, 2.0}) {
      const ReferenceSolution sol = solve_fk(free, sigma, 1.0, g);
      CHECK(max_relative_error(sol.psi, closed_form_psi(g, sigma, 1.0)) < 1e-4);
    }
  }

  TEST_CASE("free diffusion, closed form at eps = 1/2") {
    const Grid1D g = Grid1D::with_spacing(0.0, 2.0, 1e-3);
    const ReferenceSolution sol = solve_fk(FreePotential{}, 1.0, 0.5, g);
    CHECK(max_relative_error(sol.psi, closed_form_psi(g, 1.0, 0.5)) < 1e-4);
  }

  TEST_CASE("free diffusion mean first passage time") {
    const Grid1D g = Grid1D::with_spacing(0.0, 2.0, 1e-3);
    const double eps = 0.5, L = 2.0;
    const auto m = solve_mfpt_pde(FreePotential{}, eps, g);
    std::vector<double> exact;
    for (double x : g.nodes()) exact.push_back((2.0 * L * x - x * x) / (2.0 * eps));
    CHECK(max_relative_error(m, exact) < 1e-4);
    CHECK(mfpt_quadrature_oracle(FreePotential{}, eps, 1.5, 0.0, L) == doctest::Approx(exact[1500]).epsilon(1e-8));
  }

  TEST_CASE("quadrature oracle against 30-digit values") {
    const auto v = make_skew_double_well();
    for (const auto& ref : testing::kSkewMfpt) {
      CAPTURE(ref.x);
      CHECK(testing::rel_err(mfpt_quadrature_oracle(*v, 0.5, ref.x, -1.0, 2.0), ref.mfpt) < 1e-8);
    }
    const HarmonicPotential harm(1, 1.0, 0.0);
    CHECK(testing::rel_err(mfpt_quadrature_oracle(harm, 0.5, 1.0, 0.0, 1.0), testing::kHarmonicMfpt) < 1e-8);
    CHECK_THROWS(mfpt_quadrature_oracle(*v, 0.5, -1.5, -1.0, 2.0));
  }

  TEST_CASE("grid mean first passage time against 30-digit values") {
    const auto v = make_skew_double_well();
    const Grid1D g = Grid1D::with_spacing(-1.0, 2.0, 1e-3);
    const auto m = solve_mfpt_pde(*v, 0.5, g);
    ReferenceSolution holder;
    holder.grid = g;
    for (const auto& ref : testing::kSkewMfpt) {
      CAPTURE(ref.x);
      CHECK(testing::rel_err(holder.interpolate(m, ref.x), ref.mfpt) < 1e-3);
    }
    CHECK(m[0] == 0.0);
    for (std::size_t i = 1; i < g.n; ++i) CHECK(m[i] > m[i - 1]);
    // the overload taking V' at the nodes gives the same numbers
    std::vector<double> grad(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
      const double x = g.node(i);
      grad[i] = v->gradient(std::span<const double>(&x, 1))[0];
    }
    CHECK(solve_mfpt_pde(grad, 0.5, g) == m);
  }

  TEST_CASE("mean first passage time from the sigma derivative") {
    const auto v = make_skew_double_well();
    const Grid1D g = Grid1D::with_spacing(-1.0, 2.0, 1e-3);
    const auto direct = solve_mfpt_pde(*v, 0.5, g);
    CHECK(max_relative_error(mfpt_from_sigma_derivative(*v, 0.5, g), direct) < 1e-2);
  }

  TEST_CASE("second-order convergence") {
    const auto v = make_skew_double_well();
    std::vector<double> at_one;
    for (double dx : {0.02, 0.01, 0.005}) {
      const ReferenceSolution sol = solve_fk(*v, 1.0, 0.5, Grid1D::with_spacing(-1.0, 2.0, dx));
      at_one.push_back(sol.interpolate(sol.free_energy, 1.0));
    }
    const double order = std::log2(std::abs(at_one[0] - at_one[1]) / std::abs(at_one[1] - at_one[2]));
    CAPTURE(order);
    CHECK(order >= 1.8);
  }

  TEST_CASE("maximum principle and boundary values") {
    const auto v = make_skew_double_well();
    const ReferenceSolution sol = testing::skew_reference();
    CHECK(sol.psi[0] == 1.0);
    CHECK(sol.free_energy[0] == 0.0);
    for (std::size_t i = 1; i < sol.grid.n; ++i) {
      CHECK(sol.psi[i] > 0.0);
      CHECK(sol.psi[i] < sol.psi[i - 1]);
    }
    // landmarks of the default problem
    CHECK(sol.interpolate(sol.free_energy, 0.0) == doctest::Approx(0.689).epsilon(2e-3));
    CHECK(sol.interpolate(sol.free_energy, 1.0) == doctest::Approx(1.886).epsilon(2e-3));
    CHECK(sol.interpolate(sol.free_energy, 2.0) == doctest::Approx(2.036).epsilon(2e-3));
  }

  TEST_CASE("Hamilton-Jacobi residual shrinks with the grid") {
    const auto v = make_skew_double_well();
    auto worst = [&](double dx) {
      const ReferenceSolution sol = solve_fk(*v, 1.0, 0.5, Grid1D::with_spacing(-1.0, 2.0, dx));
      double w = 0.0;
      for (double r : hjb_residual(sol, *v)) w = std::max(w, std::abs(r));
      return w;
    };
    const double coarse = worst(0.01), fine = worst(0.005);
    CHECK(fine < 1e-2);
    CHECK(coarse / fine > 3.0);
  }

  TEST_CASE("grid control is minus sqrt(2) times the slope of F") {
    const ReferenceSolution sol = testing::skew_reference();
    const GridControl c(sol);
    const double dx = sol.grid.dx();
    for (std::size_t i : {std::size_t{200}, std::size_t{1500}, std::size_t{2800}}) {
      const double x = sol.grid.node(i);
      double out = 0.0;
      c.evaluate(std::span<const double>(&x, 1), std::span<double>(&out, 1));
      CHECK(out == doctest::Approx(-std::numbers::sqrt2 * (sol.free_energy[i + 1] - sol.free_energy[i - 1]) / (2 * dx)));
    }
    // clamped outside the grid
    double left = 0.0, edge = 0.0;
    const double far = -1.05, lo = sol.grid.lo;
    c.evaluate(std::span<const double>(&far, 1), std::span<double>(&left, 1));
    c.evaluate(std::span<const double>(&lo, 1), std::span<double>(&edge, 1));
    CHECK(left == edge);
  }

  TEST_CASE("csv output") {
    ReferenceSolution sol = solve_fk(FreePotential{}, 1.0, 0.5, Grid1D{0.0, 1.0, 3});
    sol.mfpt = solve_mfpt_pde(FreePotential{}, 0.5, sol.grid);
    std::ostringstream os;
    sol.write_csv(os, "feed");
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "# config_hash: feed");
    std::getline(in, line);
    CHECK(line == "x,psi,F,mfpt");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);
  }

  TEST_CASE("input checks") {
    CHECK_THROWS(Grid1D::with_spacing(1.0, 0.0, 0.1));
    CHECK_THROWS(Grid1D::with_spacing(0.0, 1.0, 0.8));
    CHECK_THROWS(solve_fk(FreePotential{}, -1.0, 0.5, Grid1D{0.0, 1.0, 11}));
    CHECK_THROWS(solve_fk(FreePotential{}, 1.0, 0.0, Grid1D{0.0, 1.0, 11}));
    CHECK_THROWS(reference_grid(IntervalSet(1.0, 2.5), SimulationDomain::interval(-1.5, 2.0), 1e-3));
  }

  TEST_CASE("tilted speedup") {
    // The tilt V + 2F shortens the passage from the right-well minimum by
    // at least a factor of ten.
    const auto v = make_skew_double_well();
    const ReferenceSolution sol = testing::skew_reference();
    const Grid1D& g = sol.grid;
    std::vector<double> grad_v(g.n), grad_g(g.n);
    const auto& F = sol.free_energy;
    for (std::size_t i = 0; i < g.n; ++i) {
      const double x = g.node(i);
      grad_v[i] = v->gradient(std::span<const double>(&x, 1))[0];
      const double dF = i == 0           ? (F[1] - F[0]) / g.dx()
                        : i + 1 == g.n ? (F[i] - F[i - 1]) / g.dx()
                                       : (F[i + 1] - F[i - 1]) / (2.0 * g.dx());
      grad_g[i] = grad_v[i] + 2.0 * dF;
    }
    const double plain = sol.interpolate(solve_mfpt_pde(grad_v, 0.5, g), testing::kX0);
    const double tilted = sol.interpolate(solve_mfpt_pde(grad_g, 0.5, g), testing::kX0);
    CAPTURE(plain);
    CAPTURE(tilted);
    CHECK(plain / tilted >= 10.0);
  }
}

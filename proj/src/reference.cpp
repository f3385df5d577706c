#include "rareforce/reference.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <numbers>
#include <ostream>

namespace rareforce {

std::vector<double> Grid1D::nodes() const {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = node(i);
  return x;
}

Grid1D Grid1D::with_spacing(double lo, double hi, double dx) {
  if (!(hi > lo)) throw std::invalid_argument("grid needs hi > lo");
  if (!(dx > 0.0)) throw std::invalid_argument("grid spacing must be positive");
  const double cells = std::round((hi - lo) / dx);
  if (cells < 2.0) throw std::invalid_argument("grid needs at least two cells");
  return {lo, hi, static_cast<std::size_t>(cells) + 1};
}

Grid1D reference_grid(const IntervalSet& s, const SimulationDomain& domain, double dx) {
  if (domain.dimension() != 1) throw std::invalid_argument("reference solutions are 1D");
  if (!(s.hi() < domain.hi[0])) throw std::invalid_argument("stopping set must lie left of the domain's right edge");
  return Grid1D::with_spacing(s.hi(), domain.hi[0], dx);
}

double ReferenceSolution::interpolate(const std::vector<double>& values, double x) const {
  if (values.size() != grid.n) throw std::invalid_argument("value array does not match the grid");
  const double t = (x - grid.lo) / grid.dx();
  if (t <= 0.0) return values.front();
  if (t >= static_cast<double>(grid.n - 1)) return values.back();
  const auto i = static_cast<std::size_t>(t);
  const double w = t - static_cast<double>(i);
  return (1.0 - w) * values[i] + w * values[i + 1];
}

void ReferenceSolution::write_csv(std::ostream& os, const std::string& config_hash) const {
  if (!config_hash.empty()) os << "# config_hash: " << config_hash << "\n";
  os << "x,psi,F,mfpt\n";
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double m = mfpt.empty() ? std::nan("") : mfpt[i];
    fmt::print(os, "{:.17g},{:.17g},{:.17g},{:.17g}\n", grid.node(i), psi[i], free_energy[i], m);
  }
}

namespace {

std::vector<double> gradient_at_nodes(const Potential& p, const Grid1D& grid) {
  if (p.dimension() != 1) throw std::invalid_argument("reference solutions are 1D");
  std::vector<double> g(grid.n);
  double x = 0.0, d = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) {
    x = grid.node(i);
    p.gradient(std::span<const double>(&x, 1), std::span<double>(&d, 1));
    g[i] = d;
  }
  return g;
}

// Solves eps u'' - V' u' - q u = rhs on nodes 1..n-1 with u_0 = u_left and
// u' = 0 at node n-1 (ghost node mirrored).
std::vector<double> solve_backward(const std::vector<double>& grad_v, double epsilon, const Grid1D& grid,
                                   double q, double rhs, double u_left) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (grad_v.size() != grid.n) throw std::invalid_argument("gradient array does not match the grid");
  const std::size_t n = grid.n;
  const double dx = grid.dx();
  const double diff = epsilon / (dx * dx);
  const std::size_t m = n - 1;  // unknowns u_1..u_{n-1}
  std::vector<double> lower(m), diag(m), upper(m), r(m, rhs);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = k + 1;
    const double adv = grad_v[i] / (2.0 * dx);
    lower[k] = diff + adv;
    upper[k] = diff - adv;
    diag[k] = -2.0 * diff - q;
  }
  // Node n-1: the ghost value equals u_{n-2}.
  lower[m - 1] += upper[m - 1];
  upper[m - 1] = 0.0;
  r[0] -= lower[0] * u_left;
  lower[0] = 0.0;

  // Thomas algorithm.
  for (std::size_t k = 1; k < m; ++k) {
    if (std::abs(diag[k - 1]) < 1e-300) throw NumericalError("singular tridiagonal system");
    const double w = lower[k] / diag[k - 1];
    diag[k] -= w * upper[k - 1];
    r[k] -= w * r[k - 1];
  }
  if (std::abs(diag[m - 1]) < 1e-300) throw NumericalError("singular tridiagonal system");
  std::vector<double> u(n);
  u[0] = u_left;
  u[m] = r[m - 1] / diag[m - 1];
  for (std::size_t k = m - 1; k-- > 0;) u[k + 1] = (r[k] - upper[k] * u[k + 2]) / diag[k];
  for (double v : u) {
    if (!std::isfinite(v)) throw NumericalError("non-finite value in the grid solution");
  }
  return u;
}

}  // namespace

ReferenceSolution solve_fk(const Potential& p, double sigma, double epsilon, const Grid1D& grid) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
  ReferenceSolution sol;
  sol.grid = grid;
  sol.sigma = sigma;
  sol.epsilon = epsilon;
  sol.psi = solve_backward(gradient_at_nodes(p, grid), epsilon, grid, sigma / epsilon, 0.0, 1.0);
  sol.free_energy.resize(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) {
    if (!(sol.psi[i] > 0.0)) {
      throw NumericalError(fmt::format("psi <= 0 at x = {} (grid too coarse?)", grid.node(i)));
    }
    sol.free_energy[i] = -epsilon * std::log(sol.psi[i]);
  }
  return sol;
}

std::vector<double> solve_mfpt_pde(const std::vector<double>& grad_v, double epsilon, const Grid1D& grid) {
  return solve_backward(grad_v, epsilon, grid, 0.0, -1.0, 0.0);
}

std::vector<double> solve_mfpt_pde(const Potential& p, double epsilon, const Grid1D& grid) {
  return solve_mfpt_pde(gradient_at_nodes(p, grid), epsilon, grid);
}

std::vector<double> mfpt_from_sigma_derivative(const Potential& p, double epsilon, const Grid1D& grid,
                                               double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  const ReferenceSolution sol = solve_fk(p, delta, epsilon, grid);
  std::vector<double> m(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) m[i] = -epsilon * std::expm1(std::log(sol.psi[i])) / delta;
  return m;
}

double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i] == 0.0) continue;
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::abs(b[i]));
  }
  return worst;
}

double mfpt_quadrature_oracle(const Potential& p, double epsilon, double x, double absorb_at, double reflect_at) {
  if (p.dimension() != 1) throw std::invalid_argument("quadrature oracle is 1D");
  if (!(absorb_at < x && x <= reflect_at)) throw std::invalid_argument("oracle needs a < x <= b");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
  constexpr unsigned depth = 20;
  constexpr double tol = 1e-12;

  auto V = [&](double y) { return p.value(std::span<const double>(&y, 1)); };
  double inner_error = 0.0;
  auto outer = [&](double y) {
    const double vy = V(y);
    double err = 0.0;
    // exp((V(y) - V(z))/eps) keeps the exponent small where it matters.
    const double in = Quad::integrate([&](double z) { return std::exp((vy - V(z)) / epsilon); }, y, reflect_at,
                                      depth, tol, &err);
    inner_error = std::max(inner_error, err);
    return in;
  };
  double outer_error = 0.0;
  const double integral = Quad::integrate(outer, absorb_at, x, depth, tol, &outer_error);
  const double value = integral / epsilon;
  const double error = (outer_error + inner_error * (x - absorb_at)) / epsilon;
  if (!std::isfinite(value) || (error > 1e-8 && error > 1e-6 * std::abs(value))) {
    throw NumericalError(fmt::format("quadrature did not converge: value {} with error estimate {} "
                                     "(outer {}, max inner {})",
                                     value, error, outer_error, inner_error));
  }
  return value;
}

std::vector<double> hjb_residual(const ReferenceSolution& sol, const Potential& p) {
  const auto& F = sol.free_energy;
  const auto g = gradient_at_nodes(p, sol.grid);
  const double dx = sol.grid.dx();
  std::vector<double> res(sol.grid.n, 0.0);
  for (std::size_t i = 1; i + 1 < sol.grid.n; ++i) {
    const double d1 = (F[i + 1] - F[i - 1]) / (2.0 * dx);
    const double d2 = (F[i + 1] - 2.0 * F[i] + F[i - 1]) / (dx * dx);
    res[i] = sol.epsilon * d2 - g[i] * d1 - d1 * d1 + sol.sigma;
  }
  return res;
}

GridControl::GridControl(const ReferenceSolution& sol) : grid_(sol.grid), control_(sol.grid.n) {
  const auto& F = sol.free_energy;
  const std::size_t n = grid_.n;
  const double dx = grid_.dx();
  if (n < 3) throw std::invalid_argument("grid too small for a control");
  for (std::size_t i = 1; i + 1 < n; ++i) control_[i] = (F[i + 1] - F[i - 1]) / (2.0 * dx);
  control_[0] = (-3.0 * F[0] + 4.0 * F[1] - F[2]) / (2.0 * dx);
  control_[n - 1] = (3.0 * F[n - 1] - 4.0 * F[n - 2] + F[n - 3]) / (2.0 * dx);
  for (double& c : control_) c *= -std::numbers::sqrt2;
}

void GridControl::evaluate(std::span<const double> x, std::span<double> out) const {
  const double t = (x[0] - grid_.lo) / grid_.dx();
  if (t <= 0.0) {
    out[0] = control_.front();
  } else if (t >= static_cast<double>(grid_.n - 1)) {
    out[0] = control_.back();
  } else {
    const auto i = static_cast<std::size_t>(t);
    const double w = t - static_cast<double>(i);
    out[0] = (1.0 - w) * control_[i] + w * control_[i + 1];
  }
}

}  // namespace rareforce

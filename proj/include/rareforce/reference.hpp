#pragma once

// 1D grid solutions used as ground truth:
//
//   eps psi'' - V' psi' - (sigma/eps) psi = 0,  psi = 1 at the stopping set
//   eps m''   - V' m'   = -1,                   m = 0 at the stopping set
//
// with a reflecting (zero-derivative) condition at the far edge, and
// F = -eps log psi. Second-order centered differences, tridiagonal solve.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rareforce/dynamics.hpp"
#include "rareforce/model.hpp"

namespace rareforce {

/// Uniform grid from the absorbing edge (node 0) to the reflecting edge.
struct Grid1D {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n = 2;  // node count

  double dx() const { return (hi - lo) / static_cast<double>(n - 1); }
  double node(std::size_t i) const { return i + 1 == n ? hi : lo + dx() * static_cast<double>(i); }
  std::vector<double> nodes() const;

  /// n = round((hi - lo)/dx) + 1 so both ends are nodes.
  static Grid1D with_spacing(double lo, double hi, double dx);
};

/// Grid from the right edge of `s` to the right edge of the domain.
Grid1D reference_grid(const IntervalSet& s, const SimulationDomain& domain, double dx);

struct ReferenceSolution {
  Grid1D grid;
  std::vector<double> psi;
  std::vector<double> free_energy;  // -eps log psi
  std::vector<double> mfpt;         // empty unless solved
  double sigma = 0.0;
  double epsilon = 0.5;

  /// Linear interpolation of a node array.
  double interpolate(const std::vector<double>& values, double x) const;
  void write_csv(std::ostream& os, const std::string& config_hash = {}) const;
};

/// psi and F for the constant observable sigma. Throws NumericalError if the
/// system is singular or psi <= 0 at some node.
ReferenceSolution solve_fk(const Potential& p, double sigma, double epsilon, const Grid1D& grid);

/// Mean first passage time to the grid's left node.
std::vector<double> solve_mfpt_pde(const Potential& p, double epsilon, const Grid1D& grid);
/// Same with V' given at the nodes.
std::vector<double> solve_mfpt_pde(const std::vector<double>& grad_v, double epsilon, const Grid1D& grid);

/// MFPT via the sigma-derivative, E[tau] ~ -eps (psi_delta - 1)/delta.
std::vector<double> mfpt_from_sigma_derivative(const Potential& p, double epsilon, const Grid1D& grid,
                                               double delta = 1e-4);

/// Max over nodes x > lo of |a - b| / |b|.
double max_relative_error(const std::vector<double>& a, const std::vector<double>& b);

/// E[tau](x) = (1/eps) int_a^x e^{V(y)/eps} int_y^b e^{-V(z)/eps} dz dy with
/// adaptive Gauss-Kronrod quadrature; absorbing at a, reflecting at b.
/// Throws NumericalError if the error estimate exceeds 1e-8 absolute and
/// 1e-6 relative.
double mfpt_quadrature_oracle(const Potential& p, double epsilon, double x, double absorb_at, double reflect_at);

/// Centered-difference residual eps F'' - V'F' - F'^2 + sigma at interior nodes
/// (zero at the ends).
std::vector<double> hjb_residual(const ReferenceSolution& sol, const Potential& p);

/// Feedback c = -sqrt(2) F' from a grid solution, F' by centered
/// differences and linear interpolation; clamped to the grid ends.
class GridControl final : public ControlField {
 public:
  explicit GridControl(const ReferenceSolution& sol);

  std::size_t dimension() const override { return 1; }
  void evaluate(std::span<const double> x, std::span<double> out) const override;

 private:
  Grid1D grid_;
  std::vector<double> control_;
};

}  // namespace rareforce

#pragma once

#include <cmath>
#include <functional>
#include <memory>

#include "rareforce/ansatz.hpp"
#include "rareforce/dynamics.hpp"
#include "rareforce/model.hpp"
#include "rareforce/reference.hpp"

namespace testing {

// Frozen values from tests/oracles/mfpt_mpmath.py (30-digit mpmath).
inline constexpr double kHarmonicMfpt = 0.739441630099079300500648896428;  // V=x^2/2, eps=0.5, a=0, x=b=1
struct SkewMfpt {
  double x;
  double mfpt;
};
// V=(x^2-1)^2+x/4, eps=0.5, absorbing at -1, reflecting at 2.
inline constexpr SkewMfpt kSkewMfpt[] = {
    {-0.5, 0.835035092609811525682},
    {0.0, 3.35151630442841429596},
    {0.5, 6.04753592244927282096},
    {1.5, 6.87904248154948408715},
    {2.0, 6.91195403590727324118},
};

// Right-well minimum of the default potential.
inline constexpr double kX0 = 0.96714893788303;

class FunctionControl final : public rareforce::ControlField {
 public:
  explicit FunctionControl(std::function<double(double)> c) : c_(std::move(c)) {}
  std::size_t dimension() const override { return 1; }
  void evaluate(std::span<const double> x, std::span<double> out) const override { out[0] = c_(x[0]); }

 private:
  std::function<double(double)> c_;
};

inline rareforce::Model skew_model(double sigma = 1.0) {
  rareforce::Model m;
  m.potential = rareforce::make_skew_double_well();
  m.observable = rareforce::Observable::constant(sigma);
  m.stopping_set = std::make_shared<rareforce::IntervalSet>(-1.1, -1.0);
  m.domain = rareforce::SimulationDomain::interval(-1.5, 2.0);
  return m;
}

// Default ten-Gaussian ansatz (variance 0.1) on [-1, 2].
inline rareforce::GaussianAnsatz default_ansatz() {
  return rareforce::make_uniform_ansatz(10, -1.5, 2.0, rareforce::IntervalSet(-1.1, -1.0), std::sqrt(0.1), kX0);
}

inline rareforce::ReferenceSolution skew_reference(double sigma = 1.0, double dx = 1e-3) {
  const auto grid = rareforce::reference_grid(rareforce::IntervalSet(-1.1, -1.0),
                                              rareforce::SimulationDomain::interval(-1.5, 2.0), dx);
  return rareforce::solve_fk(*rareforce::make_skew_double_well(), sigma, 0.5, grid);
}

// Least-squares fit of the ansatz value to the grid free energy.
inline Eigen::VectorXd fit_to_reference(const rareforce::GaussianAnsatz& g, const rareforce::ReferenceSolution& ref) {
  const std::vector<double> nodes = ref.grid.nodes();
  Eigen::MatrixXd A(static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(g.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(nodes.size()));
  std::vector<double> v(g.size()), b(g.size() * g.dimension());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    g.basis(std::span<const double>(&nodes[i], 1), v, b);
    for (std::size_t j = 0; j < g.size(); ++j) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
    y[static_cast<Eigen::Index>(i)] = ref.free_energy[i];
  }
  return A.colPivHouseholderQr().solve(y);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace testing

#pragma once

// Gaussian ansatz for the value function and the induced feedback control:
//
//   F~(x) = sum_j a_j v_j(x),   v_j(x) = exp(-|x - mu_j|^2 / (2 s_j^2))
//   c(x)  = sum_j a_j b_j(x),   b_j = -sqrt(2) grad v_j
//
// so that c = -sqrt(2) grad F~ holds identically.

#include <Eigen/Dense>
#include <json.hpp>
#include <memory>
#include <span>
#include <vector>

#include "rareforce/dynamics.hpp"
#include "rareforce/model.hpp"

namespace rareforce {

class GaussianAnsatz final : public ControlField {
 public:
  GaussianAnsatz() = default;
  /// centers is row-major m x dim.
  GaussianAnsatz(std::size_t dim, std::vector<double> centers, std::vector<double> widths);

  std::size_t dimension() const override { return dim_; }
  std::size_t size() const { return widths_.size(); }

  std::span<const double> center(std::size_t j) const { return {centers_.data() + j * dim_, dim_}; }
  const std::vector<double>& centers() const { return centers_; }
  const std::vector<double>& widths() const { return widths_; }

  const Eigen::VectorXd& coefficients() const { return coeffs_; }
  void set_coefficients(const Eigen::VectorXd& a);

  /// Inactive basis functions contribute nothing to value or control.
  bool active(std::size_t j) const { return active_[j]; }
  const std::vector<bool>& mask() const { return active_; }
  void set_mask(std::vector<bool> mask);
  std::size_t active_count() const;

  double value(std::span<const double> x) const;
  void evaluate(std::span<const double> x, std::span<double> out) const override;
  /// Both at once; returns the value.
  double value_and_control(std::span<const double> x, std::span<double> control) const;

  /// v_j(x) and b_j(x) for every basis function (masked ones are zeroed).
  /// b is row-major m x dim.
  void basis(std::span<const double> x, std::span<double> v, std::span<double> b) const;

 private:
  std::size_t dim_ = 1;
  std::vector<double> centers_;
  std::vector<double> widths_;
  Eigen::VectorXd coeffs_;
  std::vector<bool> active_;
};

struct ValueAndControl {
  double value = 0.0;
  Point control;
};

ValueAndControl eval_value_and_control(const GaussianAnsatz& ansatz, std::span<const double> x);

/// m centers uniformly spaced (endpoints included) over the component of
/// [lo, hi] \ exclude that contains `start`; widths are standard deviations.
GaussianAnsatz make_uniform_ansatz(std::size_t m, double lo, double hi, const IntervalSet& exclude,
                                   double width, double start);

/// G(x) = V(x) + 2 F~(x).
double tilted_potential(const GaussianAnsatz& ansatz, const Potential& p, std::span<const double> x);

/// G = V + 2 F~ as a Potential; grad G = grad V - sqrt(2) c.
class TiltedPotential final : public Potential {
 public:
  TiltedPotential(std::shared_ptr<const Potential> base, GaussianAnsatz ansatz);

  std::size_t dimension() const override { return base_->dimension(); }
  double value(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> grad) const override;
  using Potential::gradient;
  std::string label() const override { return "tilted(" + base_->label() + ")"; }

 private:
  std::shared_ptr<const Potential> base_;
  GaussianAnsatz ansatz_;
};

/// Initial coefficients that fill up the wells of V: least-squares fit of
/// F~ to max(0, (V_barrier - V)/2) on `grid`, where V_barrier is the highest
/// interior local maximum of V between `start` and `target_edge`. Zero if
/// there is no such barrier. Only active basis functions are fitted.
Eigen::VectorXd init_fill_wells(const GaussianAnsatz& ansatz, const Potential& p,
                                std::span<const double> grid, double start, double target_edge);

nlohmann::json ansatz_to_json(const GaussianAnsatz& ansatz);
GaussianAnsatz ansatz_from_json(const nlohmann::json& j);

}  // namespace rareforce

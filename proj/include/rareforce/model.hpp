#pragma once

// Energy landscapes, running-cost observables, stopping sets and the
// truncated simulation domain. Everything here is immutable after
// construction and may be shared freely between worker threads.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rareforce {

using Point = std::vector<double>;

/// Raised when a point leaves the configured simulation domain.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on NaN/Inf produced by the dynamics or a solver.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Potential {
 public:
  virtual ~Potential() = default;

  virtual std::size_t dimension() const = 0;
  virtual double value(std::span<const double> x) const = 0;
  virtual void gradient(std::span<const double> x, std::span<double> grad) const = 0;
  virtual std::string label() const = 0;

  Point gradient(std::span<const double> x) const {
    Point g(dimension());
    gradient(x, g);
    return g;
  }
};

/// V(x) = (x^2 - 1)^2 + tilt * x.
class SkewDoubleWell final : public Potential {
 public:
  explicit SkewDoubleWell(double tilt = 0.25) : tilt_(tilt) {}

  std::size_t dimension() const override { return 1; }
  double value(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> grad) const override;
  using Potential::gradient;
  std::string label() const override;

  double tilt() const { return tilt_; }

 private:
  double tilt_;
};

/// V = 0 in n dimensions (free Brownian motion).
class FreePotential final : public Potential {
 public:
  explicit FreePotential(std::size_t dim = 1) : dim_(dim) {}

  std::size_t dimension() const override { return dim_; }
  double value(std::span<const double>) const override { return 0.0; }
  void gradient(std::span<const double> x, std::span<double> grad) const override;
  using Potential::gradient;
  std::string label() const override { return "free"; }

 private:
  std::size_t dim_;
};

/// V(x) = stiffness/2 * |x - center|^2.
class HarmonicPotential final : public Potential {
 public:
  HarmonicPotential(std::size_t dim, double stiffness, double center = 0.0);

  std::size_t dimension() const override { return dim_; }
  double value(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> grad) const override;
  using Potential::gradient;
  std::string label() const override;

 private:
  std::size_t dim_;
  double stiffness_;
  double center_;
};

/// Running cost f of the work functional W = int_0^tau f(X_t) dt.
class Observable {
 public:
  enum class Kind { constant, general };

  static Observable constant(double sigma);
  static Observable general(std::function<double(std::span<const double>)> f);

  double operator()(std::span<const double> x) const {
    return kind_ == Kind::constant ? sigma_ : fn_(x);
  }

  Kind kind() const { return kind_; }
  /// Only meaningful for Kind::constant.
  double sigma() const { return sigma_; }

 private:
  Observable() = default;

  Kind kind_ = Kind::constant;
  double sigma_ = 0.0;
  std::function<double(std::span<const double>)> fn_;
};

class StoppingSet {
 public:
  virtual ~StoppingSet() = default;
  virtual bool contains(std::span<const double> x) const = 0;
  virtual std::string label() const = 0;
};

/// Closed interval [lo, hi] on the real line.
class IntervalSet final : public StoppingSet {
 public:
  IntervalSet(double lo, double hi);

  bool contains(std::span<const double> x) const override { return lo_ <= x[0] && x[0] <= hi_; }
  std::string label() const override;

  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// Closed Euclidean ball.
class BallSet final : public StoppingSet {
 public:
  BallSet(Point center, double radius);

  bool contains(std::span<const double> x) const override;
  std::string label() const override;

 private:
  Point center_;
  double radius_;
};

enum class BoundaryBehavior { reflect, abort };

/// Axis-aligned box the simulation is truncated to.
struct SimulationDomain {
  std::vector<double> lo;
  std::vector<double> hi;
  BoundaryBehavior boundary = BoundaryBehavior::reflect;

  static SimulationDomain interval(double lo, double hi,
                                   BoundaryBehavior b = BoundaryBehavior::reflect) {
    return {{lo}, {hi}, b};
  }

  std::size_t dimension() const { return lo.size(); }
  bool contains(std::span<const double> x) const;
  void validate() const;
};

/// Everything the dynamics needs to know about the problem.
struct Model {
  std::shared_ptr<const Potential> potential;
  Observable observable = Observable::constant(1.0);
  std::shared_ptr<const StoppingSet> stopping_set;
  SimulationDomain domain;

  std::size_t dimension() const { return potential->dimension(); }
  void validate() const;
};

struct ModelEval {
  double energy = 0.0;
  Point grad;
  double cost = 0.0;
};

/// V(x), grad V(x) and f(x) in one call; throws DomainError outside the box.
ModelEval eval_model(const Potential& p, const Observable& f, const SimulationDomain& domain,
                     std::span<const double> x);

inline bool is_hit(const StoppingSet& s, std::span<const double> x) { return s.contains(x); }

std::shared_ptr<const Potential> make_skew_double_well();

/// Local minima of a 1D potential on [lo, hi], from sign changes of V' on a
/// grid refined by bisection.
std::vector<double> local_minima_1d(const Potential& p, double lo, double hi,
                                    std::size_t samples = 20001);
std::vector<double> local_maxima_1d(const Potential& p, double lo, double hi,
                                    std::size_t samples = 20001);

}  // namespace rareforce

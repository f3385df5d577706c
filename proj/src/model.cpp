#include "rareforce/model.hpp"

#include <cmath>
#include <fmt/format.h>

namespace rareforce {

double SkewDoubleWell::value(std::span<const double> x) const {
  const double q = x[0] * x[0] - 1.0;
  return q * q + tilt_ * x[0];
}

void SkewDoubleWell::gradient(std::span<const double> x, std::span<double> grad) const {
  grad[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0) + tilt_;
}

std::string SkewDoubleWell::label() const { return fmt::format("skew_double_well(tilt={})", tilt_); }

void FreePotential::gradient(std::span<const double>, std::span<double> grad) const {
  for (double& g : grad) g = 0.0;
}

HarmonicPotential::HarmonicPotential(std::size_t dim, double stiffness, double center)
    : dim_(dim), stiffness_(stiffness), center_(center) {
  if (dim == 0) throw std::invalid_argument("harmonic potential needs dimension >= 1");
}

double HarmonicPotential::value(std::span<const double> x) const {
  double r2 = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) r2 += (x[i] - center_) * (x[i] - center_);
  return 0.5 * stiffness_ * r2;
}

void HarmonicPotential::gradient(std::span<const double> x, std::span<double> grad) const {
  for (std::size_t i = 0; i < dim_; ++i) grad[i] = stiffness_ * (x[i] - center_);
}

std::string HarmonicPotential::label() const {
  return fmt::format("harmonic(k={},c={})", stiffness_, center_);
}

Observable Observable::constant(double sigma) {
  Observable o;
  o.kind_ = Kind::constant;
  o.sigma_ = sigma;
  return o;
}

Observable Observable::general(std::function<double(std::span<const double>)> f) {
  if (!f) throw std::invalid_argument("observable function is empty");
  Observable o;
  o.kind_ = Kind::general;
  o.fn_ = std::move(f);
  return o;
}

IntervalSet::IntervalSet(double lo, double hi) : lo_(lo), hi_(hi) {
  if (!(lo < hi)) throw std::invalid_argument("stopping interval must have lo < hi");
}

std::string IntervalSet::label() const { return fmt::format("[{}, {}]", lo_, hi_); }

BallSet::BallSet(Point center, double radius) : center_(std::move(center)), radius_(radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball radius must be positive");
}

bool BallSet::contains(std::span<const double> x) const {
  double r2 = 0.0;
  for (std::size_t i = 0; i < center_.size(); ++i) r2 += (x[i] - center_[i]) * (x[i] - center_[i]);
  return r2 <= radius_ * radius_;
}

std::string BallSet::label() const { return fmt::format("ball(r={})", radius_); }

bool SimulationDomain::contains(std::span<const double> x) const {
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(lo[i] <= x[i] && x[i] <= hi[i])) return false;
  }
  return true;
}

void SimulationDomain::validate() const {
  if (lo.empty() || lo.size() != hi.size()) throw std::invalid_argument("domain bounds malformed");
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(lo[i] < hi[i])) throw std::invalid_argument("domain requires lo < hi in every dimension");
  }
}

void Model::validate() const {
  if (!potential || !stopping_set) throw std::invalid_argument("model is missing a component");
  domain.validate();
  if (domain.dimension() != potential->dimension()) {
    throw std::invalid_argument("domain and potential dimensions differ");
  }
  if (const auto* iv = dynamic_cast<const IntervalSet*>(stopping_set.get())) {
    if (!(domain.lo[0] < iv->lo() && iv->hi() < domain.hi[0])) {
      throw std::invalid_argument("stopping set must lie strictly inside the domain");
    }
  }
}

ModelEval eval_model(const Potential& p, const Observable& f, const SimulationDomain& domain,
                     std::span<const double> x) {
  if (!domain.contains(x)) {
    throw DomainError(fmt::format("point x[0]={} is outside the simulation domain", x[0]));
  }
  ModelEval out;
  out.energy = p.value(x);
  out.grad = p.gradient(x);
  out.cost = f(x);
  return out;
}

std::shared_ptr<const Potential> make_skew_double_well() {
  return std::make_shared<SkewDoubleWell>(0.25);
}

namespace {

double derivative_1d(const Potential& p, double x) {
  double g = 0.0;
  p.gradient(std::span<const double>(&x, 1), std::span<double>(&g, 1));
  return g;
}

// Roots of V' where V' changes sign from `before` to `after`.
std::vector<double> critical_points(const Potential& p, double lo, double hi, std::size_t samples,
                                    int sign_before) {
  if (p.dimension() != 1) throw std::invalid_argument("critical points need a 1D potential");
  std::vector<double> out;
  const double dx = (hi - lo) / static_cast<double>(samples - 1);
  double xa = lo;
  double ga = derivative_1d(p, xa);
  for (std::size_t i = 1; i < samples; ++i) {
    const double xb = lo + dx * static_cast<double>(i);
    const double gb = derivative_1d(p, xb);
    const bool crosses = sign_before < 0 ? (ga < 0.0 && gb >= 0.0) : (ga > 0.0 && gb <= 0.0);
    if (crosses) {
      double a = xa, b = xb;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (a + b);
        const double gm = derivative_1d(p, mid);
        if ((sign_before < 0) == (gm < 0.0)) a = mid; else b = mid;
      }
      out.push_back(0.5 * (a + b));
    }
    xa = xb;
    ga = gb;
  }
  return out;
}

}  // namespace

std::vector<double> local_minima_1d(const Potential& p, double lo, double hi, std::size_t samples) {
  return critical_points(p, lo, hi, samples, -1);
}

std::vector<double> local_maxima_1d(const Potential& p, double lo, double hi, std::size_t samples) {
  return critical_points(p, lo, hi, samples, +1);
}

}  // namespace rareforce

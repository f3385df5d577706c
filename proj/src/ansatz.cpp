#include "rareforce/ansatz.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rareforce {

GaussianAnsatz::GaussianAnsatz(std::size_t dim, std::vector<double> centers, std::vector<double> widths)
    : dim_(dim), centers_(std::move(centers)), widths_(std::move(widths)) {
  if (dim_ == 0 || widths_.empty()) throw std::invalid_argument("ansatz needs dim >= 1 and m >= 1");
  if (centers_.size() != widths_.size() * dim_) throw std::invalid_argument("centers must be m x dim");
  for (double s : widths_) {
    if (!(s > 0.0)) throw std::invalid_argument("ansatz widths must be positive");
  }
  coeffs_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(widths_.size()));
  active_.assign(widths_.size(), true);
}

void GaussianAnsatz::set_coefficients(const Eigen::VectorXd& a) {
  if (static_cast<std::size_t>(a.size()) != size()) throw std::invalid_argument("coefficient count mismatch");
  if (!a.allFinite()) throw NumericalError("non-finite ansatz coefficients");
  coeffs_ = a;
}

void GaussianAnsatz::set_mask(std::vector<bool> mask) {
  if (mask.size() != size()) throw std::invalid_argument("mask size mismatch");
  active_ = std::move(mask);
}

std::size_t GaussianAnsatz::active_count() const {
  return static_cast<std::size_t>(std::count(active_.begin(), active_.end(), true));
}

double GaussianAnsatz::value(std::span<const double> x) const {
  double out = 0.0;
  for (std::size_t j = 0; j < size(); ++j) {
    if (!active_[j]) continue;
    const double* mu = centers_.data() + j * dim_;
    double r2 = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) r2 += (x[i] - mu[i]) * (x[i] - mu[i]);
    out += coeffs_[static_cast<Eigen::Index>(j)] * std::exp(-r2 / (2.0 * widths_[j] * widths_[j]));
  }
  return out;
}

double GaussianAnsatz::value_and_control(std::span<const double> x, std::span<double> control) const {
  std::fill(control.begin(), control.end(), 0.0);
  double out = 0.0;
  for (std::size_t j = 0; j < size(); ++j) {
    if (!active_[j]) continue;
    const double* mu = centers_.data() + j * dim_;
    const double inv_s2 = 1.0 / (widths_[j] * widths_[j]);
    double r2 = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) r2 += (x[i] - mu[i]) * (x[i] - mu[i]);
    const double av = coeffs_[static_cast<Eigen::Index>(j)] * std::exp(-0.5 * r2 * inv_s2);
    out += av;
    const double scale = std::numbers::sqrt2 * inv_s2 * av;
    for (std::size_t i = 0; i < dim_; ++i) control[i] += scale * (x[i] - mu[i]);
  }
  return out;
}

void GaussianAnsatz::evaluate(std::span<const double> x, std::span<double> out) const {
  value_and_control(x, out);
}

void GaussianAnsatz::basis(std::span<const double> x, std::span<double> v, std::span<double> b) const {
  for (std::size_t j = 0; j < size(); ++j) {
    double* bj = b.data() + j * dim_;
    if (!active_[j]) {
      v[j] = 0.0;
      std::fill(bj, bj + dim_, 0.0);
      continue;
    }
    const double* mu = centers_.data() + j * dim_;
    const double inv_s2 = 1.0 / (widths_[j] * widths_[j]);
    double r2 = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) r2 += (x[i] - mu[i]) * (x[i] - mu[i]);
    v[j] = std::exp(-0.5 * r2 * inv_s2);
    for (std::size_t i = 0; i < dim_; ++i) bj[i] = std::numbers::sqrt2 * inv_s2 * (x[i] - mu[i]) * v[j];
  }
}

ValueAndControl eval_value_and_control(const GaussianAnsatz& ansatz, std::span<const double> x) {
  ValueAndControl out;
  out.control.assign(ansatz.dimension(), 0.0);
  out.value = ansatz.value_and_control(x, out.control);
  return out;
}

GaussianAnsatz make_uniform_ansatz(std::size_t m, double lo, double hi, const IntervalSet& exclude,
                                   double width, double start) {
  if (m == 0) throw std::invalid_argument("ansatz needs at least one basis function");
  if (!(width > 0.0)) throw std::invalid_argument("ansatz width must be positive");
  double a = lo, b = hi;
  if (start > exclude.hi()) {
    a = std::max(lo, exclude.hi());
  } else if (start < exclude.lo()) {
    b = std::min(hi, exclude.lo());
  } else {
    throw std::invalid_argument("start point lies inside the excluded set");
  }
  if (!(a < b)) throw std::invalid_argument("complement of the stopping set is empty");

  std::vector<double> centers(m);
  if (m == 1) {
    centers[0] = 0.5 * (a + b);
  } else {
    for (std::size_t j = 0; j < m; ++j) {
      centers[j] = a + (b - a) * static_cast<double>(j) / static_cast<double>(m - 1);
    }
  }
  return GaussianAnsatz(1, std::move(centers), std::vector<double>(m, width));
}

double tilted_potential(const GaussianAnsatz& ansatz, const Potential& p, std::span<const double> x) {
  return p.value(x) + 2.0 * ansatz.value(x);
}

TiltedPotential::TiltedPotential(std::shared_ptr<const Potential> base, GaussianAnsatz ansatz)
    : base_(std::move(base)), ansatz_(std::move(ansatz)) {
  if (base_->dimension() != ansatz_.dimension()) throw std::invalid_argument("dimension mismatch");
}

double TiltedPotential::value(std::span<const double> x) const { return tilted_potential(ansatz_, *base_, x); }

void TiltedPotential::gradient(std::span<const double> x, std::span<double> grad) const {
  base_->gradient(x, grad);
  Point c(dimension());
  ansatz_.evaluate(x, c);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] -= std::numbers::sqrt2 * c[i];
}

Eigen::VectorXd init_fill_wells(const GaussianAnsatz& ansatz, const Potential& p,
                                std::span<const double> grid, double start, double target_edge) {
  if (p.dimension() != 1 || ansatz.dimension() != 1) throw std::invalid_argument("init_fill_wells is 1D only");
  const auto m = static_cast<Eigen::Index>(ansatz.size());
  Eigen::VectorXd a0 = Eigen::VectorXd::Zero(m);
  if (grid.size() < 3) return a0;

  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = p.value(grid.subspan(i, 1));

  const double lo = std::min(start, target_edge);
  const double hi = std::max(start, target_edge);
  bool found = false;
  double barrier = 0.0;
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    if (grid[i] <= lo || grid[i] >= hi) continue;
    if (v[i] > v[i - 1] && v[i] >= v[i + 1]) {
      if (!found || v[i] > barrier) barrier = v[i];
      found = true;
    }
  }
  if (!found) return a0;

  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < ansatz.size(); ++j) {
    if (ansatz.active(j)) cols.push_back(static_cast<Eigen::Index>(j));
  }
  const auto rows = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd A(rows, static_cast<Eigen::Index>(cols.size()));
  Eigen::VectorXd target(rows);
  std::vector<double> basis_v(ansatz.size()), basis_b(ansatz.size());
  for (Eigen::Index r = 0; r < rows; ++r) {
    ansatz.basis(grid.subspan(static_cast<std::size_t>(r), 1), basis_v, basis_b);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      A(r, static_cast<Eigen::Index>(k)) = basis_v[static_cast<std::size_t>(cols[k])];
    }
    target[r] = std::max(0.0, 0.5 * (barrier - v[static_cast<std::size_t>(r)]));
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  Eigen::VectorXd sol;
  if (qr.rank() == A.cols()) {
    sol = qr.solve(target);
  } else {
    const Eigen::MatrixXd normal = A.transpose() * A +
        1e-8 * Eigen::MatrixXd::Identity(A.cols(), A.cols());
    sol = normal.ldlt().solve(A.transpose() * target);
  }
  for (std::size_t k = 0; k < cols.size(); ++k) a0[cols[k]] = sol[static_cast<Eigen::Index>(k)];
  return a0;
}

nlohmann::json ansatz_to_json(const GaussianAnsatz& ansatz) {
  nlohmann::json j;
  j["dimension"] = ansatz.dimension();
  j["centers"] = ansatz.centers();
  j["widths"] = ansatz.widths();
  std::vector<double> a(ansatz.coefficients().data(), ansatz.coefficients().data() + ansatz.size());
  j["coefficients"] = a;
  j["active"] = ansatz.mask();
  return j;
}

GaussianAnsatz ansatz_from_json(const nlohmann::json& j) {
  const std::size_t dim = j.value("dimension", std::size_t{1});
  GaussianAnsatz out(dim, j.at("centers").get<std::vector<double>>(), j.at("widths").get<std::vector<double>>());
  const auto a = j.at("coefficients").get<std::vector<double>>();
  out.set_coefficients(Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size())));
  if (j.contains("active")) out.set_mask(j.at("active").get<std::vector<bool>>());
  return out;
}

}  // namespace rareforce

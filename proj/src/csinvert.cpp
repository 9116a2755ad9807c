#include "tomosar/csinvert.hpp"

#include <cmath>

namespace tomosar {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// One analysis level on x[0..n): approximation into out[0..n/2), detail into out[n/2..n).
void analysis_level(const std::vector<double>& low, const std::vector<double>& high, const double* x, double* out,
                    std::size_t n) {
  const std::size_t half = n / 2;
  for (std::size_t k = 0; k < half; ++k) {
    double a = 0.0;
    double d = 0.0;
    for (std::size_t m = 0; m < low.size(); ++m) {
      const double v = x[(2 * k + m) % n];
      a += low[m] * v;
      d += high[m] * v;
    }
    out[k] = a;
    out[half + k] = d;
  }
}

void synthesis_level(const std::vector<double>& low, const std::vector<double>& high, const double* coeffs,
                     double* x, std::size_t n) {
  const std::size_t half = n / 2;
  for (std::size_t j = 0; j < n; ++j) x[j] = 0.0;
  for (std::size_t k = 0; k < half; ++k) {
    for (std::size_t m = 0; m < low.size(); ++m) {
      x[(2 * k + m) % n] += low[m] * coeffs[k] + high[m] * coeffs[half + k];
    }
  }
}

}  // namespace

WaveletBasis::WaveletBasis(std::size_t n_z, std::string family, std::size_t level)
    : n_(n_z), family_(std::move(family)), level_(level) {
  if (n_z < 1) throw std::invalid_argument("wavelet basis: size must be positive");
  if (family_ == "identity") {
    level_ = 0;
  } else {
    if (family_ == "haar") {
      const double s = 1.0 / std::sqrt(2.0);
      low_ = {s, s};
    } else if (family_ == "db2") {
      const double r3 = std::sqrt(3.0);
      const double d = 4.0 * std::sqrt(2.0);
      low_ = {(1 + r3) / d, (3 + r3) / d, (3 - r3) / d, (1 - r3) / d};
    } else {
      throw std::invalid_argument("wavelet basis: unsupported family '" + family_ + "'");
    }
    if (!is_power_of_two(n_z)) {
      throw std::invalid_argument("wavelet basis: size " + std::to_string(n_z) + " is not a power of two");
    }
    std::size_t max_level = 0;
    while ((std::size_t{1} << (max_level + 1)) <= n_z) ++max_level;
    if (level_ == 0) level_ = max_level;
    if (level_ > max_level) {
      throw std::invalid_argument("wavelet basis: level " + std::to_string(level_) + " exceeds maximum " +
                                  std::to_string(max_level));
    }
    const std::size_t taps = low_.size();
    high_.resize(taps);
    for (std::size_t m = 0; m < taps; ++m) high_[m] = ((m % 2) ? -1.0 : 1.0) * low_[taps - 1 - m];
  }
  const auto n = static_cast<Eigen::Index>(n_);
  psi_.resize(n, n);
  RVector e = RVector::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    psi_.col(j) = synthesize(e);
    e[j] = 0.0;
  }
}

RVector WaveletBasis::analyze(const RVector& p) const {
  if (static_cast<std::size_t>(p.size()) != n_) throw std::invalid_argument("wavelet analyze: size mismatch");
  RVector out = p;
  if (level_ == 0) return out;
  std::vector<double> scratch(n_);
  std::size_t len = n_;
  for (std::size_t l = 0; l < level_; ++l, len /= 2) {
    analysis_level(low_, high_, out.data(), scratch.data(), len);
    std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(len), out.data());
  }
  return out;
}

RVector WaveletBasis::synthesize(const RVector& alpha) const {
  if (static_cast<std::size_t>(alpha.size()) != n_) throw std::invalid_argument("wavelet synthesize: size mismatch");
  RVector out = alpha;
  if (level_ == 0) return out;
  std::vector<double> scratch(n_);
  std::size_t len = n_ >> (level_ - 1);
  for (std::size_t l = 0; l < level_; ++l, len *= 2) {
    synthesis_level(low_, high_, out.data(), scratch.data(), len);
    std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(len), out.data());
  }
  return out;
}

WaveletBasis wavelet_basis(std::size_t n_z, const std::string& family, std::size_t level) {
  return WaveletBasis(n_z, family, level);
}

namespace {

void check_dims(const SteeringMatrix& a, const CMatrix& sigma, const WaveletBasis& basis) {
  if (sigma.rows() != sigma.cols() || static_cast<std::size_t>(sigma.rows()) != a.tracks()) {
    throw std::invalid_argument("csinvert: covariance size does not match track count");
  }
  if (basis.size() != a.heights()) throw std::invalid_argument("csinvert: basis size does not match height count");
}

// A diag(p) A^H - Sigma
CMatrix residual(const RVector& p, const SteeringMatrix& a, const CMatrix& sigma) {
  const CMatrix& steer = a.matrix();
  return (steer * p.asDiagonal()) * steer.adjoint() - sigma;
}

// Re(a_i^H M a_i) for every height i
RVector diagonal_backprojection(const CMatrix& m, const SteeringMatrix& a) {
  const CMatrix& steer = a.matrix();
  return (steer.conjugate().cwiseProduct(m * steer)).colwise().sum().real().transpose();
}

}  // namespace

double cs_objective(const RVector& alpha, const SteeringMatrix& a, const CMatrix& sigma, const WaveletBasis& basis,
                    double lambda) {
  check_dims(a, sigma, basis);
  return residual(basis.synthesize(alpha), a, sigma).squaredNorm() + lambda * alpha.lpNorm<1>();
}

RVector cs_gradient(const RVector& alpha, const SteeringMatrix& a, const CMatrix& sigma, const WaveletBasis& basis) {
  check_dims(a, sigma, basis);
  return basis.analyze(2.0 * diagonal_backprojection(residual(basis.synthesize(alpha), a, sigma), a));
}

double lipschitz_estimate(const SteeringMatrix& a, const WaveletBasis& basis) {
  if (basis.size() != a.heights()) throw std::invalid_argument("lipschitz_estimate: basis size mismatch");
  const CMatrix& steer = a.matrix();
  auto apply = [&](const RVector& v) {
    const RVector p = basis.synthesize(v);
    const CMatrix m = (steer * p.asDiagonal()) * steer.adjoint();
    return basis.analyze(diagonal_backprojection(m, a));
  };
  RVector v = basis.analyze(RVector::Ones(static_cast<Eigen::Index>(a.heights())));
  v.normalize();
  for (int it = 0; it < 50; ++it) {
    RVector w = apply(v);
    const double norm = w.norm();
    if (!(norm > 0.0)) return 0.0;
    v = w / norm;
  }
  return 2.0 * v.dot(apply(v));
}

double default_lambda(const CMatrix& sigma, const SteeringMatrix& a, const WaveletBasis& basis) {
  check_dims(a, sigma, basis);
  const double denom = basis.analyze(diagonal_backprojection(sigma, a)).lpNorm<Eigen::Infinity>();
  if (!(denom > 0.0)) return 0.0;
  return 1e-2 * sigma.squaredNorm() / denom;
}

RVector soft_threshold(const RVector& v, double t) {
  return v.unaryExpr([t](double x) { return x > t ? x - t : (x < -t ? x + t : 0.0); });
}

void CsConfig::validate() const {
  if (lambda && !(*lambda >= 0.0 && std::isfinite(*lambda))) throw std::invalid_argument("cs: lambda must be >= 0");
  if (max_iter < 1) throw std::invalid_argument("cs: max_iter must be >= 1");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("cs: rel_tol must be > 0");
}

CsSolution fista_solve(const CMatrix& sigma, const SteeringMatrix& a, const WaveletBasis& basis,
                       const CsConfig& config) {
  config.validate();
  check_dims(a, sigma, basis);
  const double lambda = config.lambda ? *config.lambda : default_lambda(sigma, a, basis);
  const double lip = lipschitz_estimate(a, basis);
  const auto n = static_cast<Eigen::Index>(basis.size());

  CsSolution sol;
  sol.lambda = lambda;
  RVector x = RVector::Zero(n);
  if (!(lip > 0.0)) {
    sol.alpha = x;
    sol.profile = RVector::Zero(n);
    sol.objective.push_back(cs_objective(x, a, sigma, basis, lambda));
    sol.converged = true;
    return sol;
  }
  const double step = 1.0 / lip;

  auto objective_of = [&](const RVector& alpha) {
    const double f = cs_objective(alpha, a, sigma, basis, lambda);
    if (!std::isfinite(f)) throw NumericalError("fista: objective is not finite (diverged)");
    return f;
  };
  auto prox_step = [&](const RVector& from) {
    return soft_threshold(from - step * cs_gradient(from, a, sigma, basis), step * lambda);
  };

  RVector y = x;
  double t = 1.0;
  double f_prev = objective_of(x);
  sol.objective.push_back(f_prev);
  for (std::size_t k = 0; k < config.max_iter; ++k) {
    RVector x_new = prox_step(y);
    double f_new = objective_of(x_new);
    if (f_new > f_prev) {
      ++sol.restarts;
      t = 1.0;
      x_new = prox_step(x);
      f_new = objective_of(x_new);
      if (f_new > f_prev) {
        // No descent even from x: converged to working precision.
        sol.iterations = k + 1;
        sol.objective.push_back(f_prev);
        sol.converged = true;
        break;
      }
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_new + ((t - 1.0) / t_new) * (x_new - x);
    x = std::move(x_new);
    t = t_new;
    sol.objective.push_back(f_new);
    sol.iterations = k + 1;
    const double change = std::abs(f_prev - f_new);
    f_prev = f_new;
    if (change <= config.rel_tol * std::max(std::abs(f_new), std::numeric_limits<double>::min())) {
      sol.converged = true;
      break;
    }
  }
  sol.alpha = x;
  sol.profile = basis.synthesize(x);
  if (config.nonneg_projection) sol.profile = sol.profile.cwiseMax(0.0);
  return sol;
}

}  // namespace tomosar

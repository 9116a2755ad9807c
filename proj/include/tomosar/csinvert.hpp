#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tomosar/common.hpp"
#include "tomosar/geometry.hpp"

namespace tomosar {

/// Orthonormal periodized wavelet basis. Columns of matrix() are the basis functions;
/// coefficient layout is [approx_J | detail_J | ... | detail_1].
class WaveletBasis {
 public:
  WaveletBasis(std::size_t n_z, std::string family, std::size_t level);

  const RMatrix& matrix() const { return psi_; }
  const std::string& family() const { return family_; }
  std::size_t level() const { return level_; }
  std::size_t size() const { return n_; }

  /// Psi * alpha, via the fast inverse transform.
  RVector synthesize(const RVector& alpha) const;
  /// Psi^T * p, via the fast forward transform.
  RVector analyze(const RVector& p) const;

 private:
  std::size_t n_;
  std::string family_;
  std::size_t level_;
  std::vector<double> low_;
  std::vector<double> high_;
  RMatrix psi_;
};

/// family: "haar" (default), "db2", or "identity". level = 0 with a wavelet family
/// selects the maximum level supported by n_z.
WaveletBasis wavelet_basis(std::size_t n_z, const std::string& family = "haar", std::size_t level = 0);

/// ||A diag(Psi alpha) A^H - Sigma||_F^2 + lambda ||alpha||_1
double cs_objective(const RVector& alpha, const SteeringMatrix& a, const CMatrix& sigma, const WaveletBasis& basis,
                    double lambda);

/// Gradient of the Frobenius term with respect to alpha.
RVector cs_gradient(const RVector& alpha, const SteeringMatrix& a, const CMatrix& sigma, const WaveletBasis& basis);

/// 2 * lambda_max(Psi^T G Psi), G_ik = |a_i^H a_k|^2, from 50 power iterations.
double lipschitz_estimate(const SteeringMatrix& a, const WaveletBasis& basis);

/// 1e-2 * ||Sigma||_F^2 / ||Psi^T b||_inf with b_i = Re(a_i^H Sigma a_i).
double default_lambda(const CMatrix& sigma, const SteeringMatrix& a, const WaveletBasis& basis);

/// sign(v) * max(|v| - t, 0), elementwise.
RVector soft_threshold(const RVector& v, double t);

struct CsConfig {
  std::optional<double> lambda;  // unset: default_lambda
  std::size_t max_iter = 500;
  double rel_tol = 1e-6;
  bool nonneg_projection = true;
  std::string wavelet = "haar";

  void validate() const;
};

struct CsSolution {
  RVector profile;
  RVector alpha;
  std::vector<double> objective;  // objective[0] is at alpha = 0
  std::size_t iterations = 0;
  std::size_t restarts = 0;
  double lambda = 0.0;
  bool converged = false;
};

/// Monotone FISTA on the synthesis objective; momentum restarts whenever a step would
/// increase the objective.
CsSolution fista_solve(const CMatrix& sigma, const SteeringMatrix& a, const WaveletBasis& basis,
                       const CsConfig& config);

}  // namespace tomosar

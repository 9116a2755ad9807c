#include "tomosar/spectral.hpp"

#include <cmath>

namespace tomosar {

namespace {

void check_dims(const CMatrix& r, const SteeringMatrix& a, const char* who) {
  if (r.rows() != r.cols() || static_cast<std::size_t>(r.rows()) != a.tracks()) {
    throw std::invalid_argument(std::string(who) + ": covariance is " + std::to_string(r.rows()) + "x" +
                                std::to_string(r.cols()) + " but steering matrix has " +
                                std::to_string(a.tracks()) + " tracks");
  }
}

}  // namespace

EstimatorOutput beamforming(const CMatrix& r, const SteeringMatrix& a) {
  check_dims(r, a, "beamforming");
  const CMatrix& steer = a.matrix();
  const double n = static_cast<double>(a.tracks());
  const CMatrix ra = r * steer;
  EstimatorOutput out{(steer.conjugate().cwiseProduct(ra)).colwise().sum().real().transpose() / (n * n),
                      "beamforming", 0};
  const double floor = -1e-8 * r.diagonal().real().mean();
  for (Eigen::Index i = 0; i < out.profile.size(); ++i) {
    double& v = out.profile[i];
    if (v < 0.0) {
      if (v < floor) throw NumericalError("beamforming: negative power, covariance is not Hermitian PSD");
      v = 0.0;
      ++out.clamped;
    }
  }
  return out;
}

EstimatorOutput capon(const CMatrix& r, const SteeringMatrix& a, double loading) {
  check_dims(r, a, "capon");
  if (!(loading >= 0.0) || !std::isfinite(loading)) throw std::invalid_argument("capon: loading must be >= 0");
  const double mean_power = r.diagonal().real().mean();
  CMatrix loaded = r;
  loaded.diagonal().array() += loading * mean_power;
  Eigen::LLT<CMatrix> chol(loaded);
  bool singular = chol.info() != Eigen::Success;
  if (!singular) {
    const double max_pivot = chol.matrixLLT().diagonal().real().cwiseAbs().maxCoeff();
    const double min_pivot = chol.matrixLLT().diagonal().real().cwiseAbs().minCoeff();
    singular = !(min_pivot > 1e-7 * max_pivot);
  }
  if (singular) {
    throw NumericalError("capon: loaded covariance is singular; use a nonzero diagonal loading");
  }
  // a^H R^{-1} a = |L^{-1} a|^2
  const CMatrix whitened = chol.matrixL().solve(a.matrix());
  EstimatorOutput out{whitened.colwise().squaredNorm().cwiseInverse().transpose(), "capon", 0};
  return out;
}

}  // namespace tomosar

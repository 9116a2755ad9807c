#pragma once

#include <cstddef>
#include <string>

#include "tomosar/common.hpp"
#include "tomosar/geometry.hpp"

namespace tomosar {

struct EstimatorOutput {
  RVector profile;
  std::string method;
  /// Heights whose negative round-off was clamped to zero.
  std::size_t clamped = 0;
};

/// profile_i = a_i^H R a_i / N^2. R must be Hermitian.
EstimatorOutput beamforming(const CMatrix& r, const SteeringMatrix& a);

inline constexpr double kDefaultCaponLoading = 1e-2;

/// profile_i = 1 / (a_i^H (R + loading * Tr(R)/N * I)^{-1} a_i).
EstimatorOutput capon(const CMatrix& r, const SteeringMatrix& a, double loading = kDefaultCaponLoading);

}  // namespace tomosar

#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "tomosar/common.hpp"

namespace tomosar {

/// Uniformly spaced vertical grid on which reflectivity profiles are sampled.
class HeightGrid {
 public:
  HeightGrid(double z_min, double z_max, std::size_t n_z);

  const RVector& heights() const { return z_; }
  double z_min() const { return z_min_; }
  double z_max() const { return z_max_; }
  std::size_t size() const { return static_cast<std::size_t>(z_.size()); }
  double spacing() const { return (z_max_ - z_min_) / static_cast<double>(size() - 1); }
  double operator[](std::size_t i) const { return z_[static_cast<Eigen::Index>(i)]; }

 private:
  double z_min_;
  double z_max_;
  RVector z_;
};

HeightGrid make_height_grid(double z_min, double z_max, std::size_t n_z);

/// Vertical wavenumbers of an interferometric stack, master track first (kz = 0).
class AcquisitionGeometry {
 public:
  explicit AcquisitionGeometry(RVector kz, std::uint64_t seed = 0);

  const RVector& kz() const { return kz_; }
  std::size_t tracks() const { return static_cast<std::size_t>(kz_.size()); }
  std::uint64_t seed() const { return seed_; }

  double span() const { return kz_.maxCoeff() - kz_.minCoeff(); }
  /// 2*pi / span(kz), in meters.
  double vertical_resolution() const { return 2.0 * kPi / span(); }

  bool operator==(const AcquisitionGeometry&) const = default;

 private:
  RVector kz_;
  std::uint64_t seed_;
};

/// Nominally uniform kz on [0, 2*pi/vertical_resolution]; interior tracks jittered
/// uniformly by up to +-perturbation of the nominal spacing.
AcquisitionGeometry synthesize_geometry(std::size_t n_tracks, double vertical_resolution,
                                        double perturbation, std::uint64_t seed);

/// One geometry per column with resolution ramping linearly from `near` to `far`.
std::vector<AcquisitionGeometry> geometry_ramp(std::size_t count, std::size_t n_tracks, double near,
                                               double far, double perturbation, std::uint64_t seed);

CVector steering_vector(const AcquisitionGeometry& geom, double z);

/// N x N_z matrix whose columns are the steering vectors of the grid heights.
class SteeringMatrix {
 public:
  SteeringMatrix(const AcquisitionGeometry& geom, const HeightGrid& grid);
  explicit SteeringMatrix(CMatrix a) : a_(std::move(a)) {}

  const CMatrix& matrix() const { return a_; }
  std::size_t tracks() const { return static_cast<std::size_t>(a_.rows()); }
  std::size_t heights() const { return static_cast<std::size_t>(a_.cols()); }
  auto column(std::size_t i) const { return a_.col(static_cast<Eigen::Index>(i)); }

 private:
  CMatrix a_;
};

SteeringMatrix steering_matrix(const AcquisitionGeometry& geom, const HeightGrid& grid);

// Key/value text form:
//   n_tracks = 6
//   kz = [0, 0.083775804095727748, ...]
//   seed = 7
void write_geometry(std::ostream& out, const AcquisitionGeometry& geom);
AcquisitionGeometry read_geometry(std::istream& in);

}  // namespace tomosar

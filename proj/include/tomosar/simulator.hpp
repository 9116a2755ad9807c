#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tomosar/common.hpp"
#include "tomosar/geometry.hpp"

namespace tomosar {

/// Nonnegative vertical power density sampled on a HeightGrid.
class ReflectivityProfile {
 public:
  explicit ReflectivityProfile(RVector p);

  const RVector& values() const { return p_; }
  std::size_t size() const { return static_cast<std::size_t>(p_.size()); }

 private:
  RVector p_;
};

struct GaussianMixtureParams {
  double amp_ground = 1.0;
  double amp_canopy = 1.0;
  double mu_ground = 0.0;
  double mu_canopy = 20.0;
  double sigma_ground = 1.0;
  double sigma_canopy = 3.0;

  void validate() const;
};

struct Range {
  double min = 0.0;
  double max = 0.0;
};

enum class ForestPreset { boreal, tropical };

std::string to_string(ForestPreset preset);
ForestPreset parse_forest_preset(const std::string& name);

struct ProfilePrior {
  Range amp_ground{1.0, 1.0};
  Range amp_canopy{0.1, 10.0};
  Range mu_ground{-3.0, 3.0};
  Range mu_canopy{8.0, 30.0};
  Range sigma_ground{0.5, 5.0};
  Range sigma_canopy{0.5, 5.0};
  double noise_power = 0.1;  // 10 dB below unit total signal power
  ForestPreset preset = ForestPreset::boreal;

  static ProfilePrior boreal();
  static ProfilePrior tropical();
  static ProfilePrior point(const GaussianMixtureParams& params, double noise_power);

  void validate() const;
};

GaussianMixtureParams sample_profile_params(const ProfilePrior& prior, Rng& rng);

/// Two-Gaussian profile on the grid, normalized to unit sum. Widths below half a grid
/// spacing are clamped to half a spacing.
ReflectivityProfile render_profile(const GaussianMixtureParams& params, const HeightGrid& grid);

/// Unnormalized two-Gaussian evaluation (same width clamp as render_profile).
RVector evaluate_mixture(const GaussianMixtureParams& params, const HeightGrid& grid);

/// A diag(p) A^H + noise_power * I.
CMatrix true_covariance(const SteeringMatrix& a, const ReflectivityProfile& p, double noise_power);

/// L looks as the columns of an N x L matrix: y_l = A diag(sqrt(p)) w_l + eps_l with
/// w_l ~ CN(0, I) and eps_l ~ CN(0, noise_power I).
CMatrix draw_speckle_stack(const SteeringMatrix& a, const ReflectivityProfile& p, double noise_power,
                           std::size_t looks, Rng& rng);

struct SampleCovariance {
  CMatrix sigma;
  std::size_t looks = 0;

  std::size_t tracks() const { return static_cast<std::size_t>(sigma.rows()); }
  /// Tr(Sigma) / N, the intensity restored after correlation-domain inversion.
  double trace_scale() const { return sigma.diagonal().real().mean(); }
};

struct SampleCorrelation {
  CMatrix r;
};

SampleCovariance sample_covariance(const CMatrix& stack);
SampleCorrelation correlation_normalize(const SampleCovariance& cov);

/// Supervised pairs: beamforming profile of R-hat as input, unit-sum profile as target.
/// Matrices hold one example per column.
struct Dataset {
  std::uint32_t tracks = 0;
  std::uint32_t heights = 0;
  std::uint32_t looks = 0;
  std::uint64_t seed = 0;
  double split = 0.75;
  RMatrix inputs;
  RMatrix targets;
  RVector trace_scale;
  std::vector<std::uint32_t> geometry_index;

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
  std::vector<std::size_t> train_indices() const;
  std::vector<std::size_t> validation_indices() const;
};

/// Deterministic permutation of [0, count): the first round(split * count) entries
/// form the training set, the rest the validation set.
std::vector<std::size_t> split_permutation(std::size_t count, std::uint64_t seed);
std::size_t train_count(std::size_t count, double split);

struct DatasetSpec {
  std::size_t count = 10000;
  std::size_t looks = 100;
  std::uint64_t seed = 1;
  double split = 0.75;
  unsigned threads = 0;
};

Dataset build_dataset(const DatasetSpec& spec, const ProfilePrior& prior,
                      const std::vector<AcquisitionGeometry>& geometries, const HeightGrid& grid);

// Little-endian binary container:
//   char[8] "TOMOSDS\0", u32 version, u64 count, u32 N, u32 N_z, u32 L, u64 seed, f64 split,
//   then per example: f64 input[N_z], f64 target[N_z], f64 trace_scale, f64 geometry_index.
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);
void export_dataset_csv(const std::string& path, const Dataset& ds);

}  // namespace tomosar

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tomosar/common.hpp"
#include "tomosar/csinvert.hpp"
#include "tomosar/geometry.hpp"
#include "tomosar/neuralnet.hpp"
#include "tomosar/simulator.hpp"
#include "tomosar/spectral.hpp"

namespace tomosar {

/// Azimuth x height reflectivity image; row j is azimuth column j.
struct Tomogram {
  RMatrix values;
  std::vector<std::uint32_t> geometry_index;
  std::string method;

  std::size_t columns() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t heights() const { return static_cast<std::size_t>(values.cols()); }
};

/// ||b * <b, p> / <b, b> - p||^2, the scale-free error of a beamforming profile.
double normalized_baseline_error(const RVector& bf_profile, const RVector& reference);

struct SceneDescription {
  std::vector<GaussianMixtureParams> columns;
  std::size_t looks = 64;
  double noise_power = 0.1;
  std::size_t tracks = 6;
  double resolution_near = 6.0;
  double resolution_far = 25.0;
  double perturbation = 0.2;

  std::vector<AcquisitionGeometry> geometries(std::uint64_t seed) const;
};

/// Columns whose mixture parameters vary smoothly (random low-frequency sinusoids)
/// inside the prior's ranges.
SceneDescription make_scene(const ProfilePrior& prior, std::size_t n_columns, std::size_t looks, std::uint64_t seed);

struct SceneStack {
  std::vector<AcquisitionGeometry> geometries;  // one per column
  std::vector<SampleCovariance> covariances;
  std::vector<SampleCorrelation> correlations;
  Tomogram truth;
};

SceneStack simulate_scene(const SceneDescription& desc, const std::vector<AcquisitionGeometry>& geometries,
                          const HeightGrid& grid, std::uint64_t seed, unsigned threads = 1);

enum class Method { beamforming, capon, cs, network };

std::string to_string(Method m);
Method parse_method(const std::string& name);
inline constexpr Method kAllMethods[] = {Method::beamforming, Method::capon, Method::cs, Method::network};

struct MethodConfig {
  double capon_loading = kDefaultCaponLoading;
  CsConfig cs;
  const NetworkWeights* weights = nullptr;
  unsigned threads = 1;
};

/// Beamforming and Capon run on R-hat, CS on Sigma-hat; the network maps the R-hat
/// beamforming profile and rescales by Tr(Sigma-hat)/N.
Tomogram reconstruct_tomogram(const SceneStack& stack, const HeightGrid& grid, Method method,
                              const MethodConfig& config);

struct RidgeMeasure {
  std::size_t peak_index = 0;
  double half_power_width = 0.0;  // meters
};

/// Canopy peak at or above `split_index` and the width of the contiguous region around
/// it that stays at or above half the peak value.
RidgeMeasure canopy_ridge(const RVector& profile, const HeightGrid& grid, std::size_t split_index);

/// First grid index at or above the midpoint between ground and canopy heights.
std::size_t canopy_split_index(const GaussianMixtureParams& params, const HeightGrid& grid);

struct LatentSweepRow {
  std::size_t latent = 0;
  double mean = 0.0;
  double std_dev = 0.0;  // sample standard deviation; 0 for a single repeat
  std::vector<double> values;
};

/// Retrains one network per (latent size, seed) on the same dataset and reports the
/// final validation MSE statistics per latent size.
std::vector<LatentSweepRow> latent_sweep(const std::vector<std::size_t>& latent_sizes,
                                         const std::vector<std::uint64_t>& seeds, const Dataset& ds,
                                         const TrainingConfig& config, const std::vector<std::size_t>& hidden,
                                         double leaky_slope = kDefaultLeakySlope);

struct TimingRow {
  std::string method;
  double median_seconds = 0.0;
  double per_profile_us = 0.0;
  double speedup_vs_cs = 0.0;
};

struct TimingReport {
  std::vector<TimingRow> rows;
  /// Every repetition of every method reproduced the first run bit for bit.
  bool deterministic = true;
};

/// Median single-threaded wall time per method over `repetitions` runs. A training row
/// is appended when training_seconds is given.
TimingReport timing_benchmark(const std::vector<Method>& methods, const SceneStack& stack, const HeightGrid& grid,
                              MethodConfig config, std::size_t repetitions,
                              std::optional<double> training_seconds = std::nullopt);

/// Reconstructions of one profile under independent speckle draws, every method.
struct RealizationSet {
  RVector truth;
  std::vector<Method> methods;
  std::vector<RMatrix> profiles;  // per method: realizations x heights
};

RealizationSet speckle_realizations(const GaussianMixtureParams& params, const AcquisitionGeometry& geometry,
                                    const HeightGrid& grid, std::size_t looks, double noise_power,
                                    std::size_t count, std::uint64_t seed, const MethodConfig& config);

void write_tomogram_csv(const std::string& path, const Tomogram& t, const HeightGrid& grid);
/// Binary 8-bit PGM, azimuth across, height upward; min-max bounds go to path + ".txt".
void write_tomogram_pgm(const std::string& path, const Tomogram& t);
void write_sweep_csv(const std::string& path, const std::vector<LatentSweepRow>& rows);
void write_timing_csv(const std::string& path, const TimingReport& report);
void write_realizations_csv(const std::string& path, const RealizationSet& set, const HeightGrid& grid);

}  // namespace tomosar

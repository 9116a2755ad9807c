#include "tomosar/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "tomosar/binary_io.hpp"
#include "tomosar/spectral.hpp"

namespace tomosar {

ReflectivityProfile::ReflectivityProfile(RVector p) : p_(std::move(p)) {
  for (Eigen::Index i = 0; i < p_.size(); ++i) {
    if (!(p_[i] >= 0.0) || !std::isfinite(p_[i])) {
      throw std::invalid_argument("reflectivity profile: entries must be finite and nonnegative");
    }
  }
}

void GaussianMixtureParams::validate() const {
  if (!(amp_ground >= 0.0 && amp_canopy >= 0.0)) throw std::invalid_argument("mixture: amplitudes must be >= 0");
  if (!(sigma_ground > 0.0 && sigma_canopy > 0.0)) throw std::invalid_argument("mixture: widths must be > 0");
  if (!(mu_ground < mu_canopy)) throw std::invalid_argument("mixture: ground must lie below canopy");
}

std::string to_string(ForestPreset preset) { return preset == ForestPreset::boreal ? "boreal" : "tropical"; }

ForestPreset parse_forest_preset(const std::string& name) {
  if (name == "boreal") return ForestPreset::boreal;
  if (name == "tropical") return ForestPreset::tropical;
  throw ConfigError("unknown forest preset '" + name + "' (expected boreal or tropical)");
}

ProfilePrior ProfilePrior::boreal() { return ProfilePrior{}; }

ProfilePrior ProfilePrior::tropical() {
  ProfilePrior prior;
  prior.mu_canopy = {15.0, 45.0};
  prior.sigma_ground = {1.0, 8.0};
  prior.sigma_canopy = {1.0, 8.0};
  prior.preset = ForestPreset::tropical;
  return prior;
}

ProfilePrior ProfilePrior::point(const GaussianMixtureParams& params, double noise_power) {
  ProfilePrior prior;
  prior.amp_ground = {params.amp_ground, params.amp_ground};
  prior.amp_canopy = {params.amp_canopy, params.amp_canopy};
  prior.mu_ground = {params.mu_ground, params.mu_ground};
  prior.mu_canopy = {params.mu_canopy, params.mu_canopy};
  prior.sigma_ground = {params.sigma_ground, params.sigma_ground};
  prior.sigma_canopy = {params.sigma_canopy, params.sigma_canopy};
  prior.noise_power = noise_power;
  return prior;
}

void ProfilePrior::validate() const {
  auto check = [](const Range& r, const char* name) {
    if (!(r.min <= r.max) || !std::isfinite(r.min) || !std::isfinite(r.max)) {
      throw std::invalid_argument(std::string("prior: ") + name + " range must satisfy min <= max");
    }
  };
  check(amp_ground, "amp_ground");
  check(amp_canopy, "amp_canopy");
  check(mu_ground, "mu_ground");
  check(mu_canopy, "mu_canopy");
  check(sigma_ground, "sigma_ground");
  check(sigma_canopy, "sigma_canopy");
  if (amp_ground.min < 0.0 || amp_canopy.min < 0.0) throw std::invalid_argument("prior: amplitudes must be >= 0");
  if (amp_ground.max <= 0.0 && amp_canopy.max <= 0.0) throw std::invalid_argument("prior: all amplitudes zero");
  if (sigma_ground.min <= 0.0 || sigma_canopy.min <= 0.0) throw std::invalid_argument("prior: widths must be > 0");
  if (!(noise_power >= 0.0)) throw std::invalid_argument("prior: noise power must be >= 0");
  if (!(mu_ground.min < mu_canopy.max)) {
    throw std::invalid_argument("prior: mu ranges make mu_ground < mu_canopy impossible");
  }
}

namespace {

double draw(const Range& r, Rng& rng) {
  if (r.min == r.max) return r.min;
  return std::uniform_real_distribution<double>(r.min, r.max)(rng);
}

}  // namespace

GaussianMixtureParams sample_profile_params(const ProfilePrior& prior, Rng& rng) {
  prior.validate();
  GaussianMixtureParams out;
  out.amp_ground = draw(prior.amp_ground, rng);
  out.amp_canopy = draw(prior.amp_canopy, rng);
  out.sigma_ground = draw(prior.sigma_ground, rng);
  out.sigma_canopy = draw(prior.sigma_canopy, rng);
  for (int attempt = 0;; ++attempt) {
    out.mu_ground = draw(prior.mu_ground, rng);
    out.mu_canopy = draw(prior.mu_canopy, rng);
    if (out.mu_ground < out.mu_canopy) break;
    if (attempt > 1'000'000) throw std::invalid_argument("prior: cannot draw ordered ground/canopy heights");
  }
  return out;
}

RVector evaluate_mixture(const GaussianMixtureParams& params, const HeightGrid& grid) {
  params.validate();
  const double min_sigma = 0.5 * grid.spacing();
  const double sg = std::max(params.sigma_ground, min_sigma);
  const double sc = std::max(params.sigma_canopy, min_sigma);
  const RVector& z = grid.heights();
  RVector p(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double dg = (z[i] - params.mu_ground) / sg;
    const double dc = (z[i] - params.mu_canopy) / sc;
    p[i] = params.amp_ground * std::exp(-0.5 * dg * dg) + params.amp_canopy * std::exp(-0.5 * dc * dc);
  }
  return p;
}

ReflectivityProfile render_profile(const GaussianMixtureParams& params, const HeightGrid& grid) {
  RVector p = evaluate_mixture(params, grid);
  const double total = p.sum();
  if (!(total > 0.0)) throw std::invalid_argument("render_profile: profile has no power on the grid");
  p /= total;
  return ReflectivityProfile(std::move(p));
}

CMatrix true_covariance(const SteeringMatrix& a, const ReflectivityProfile& p, double noise_power) {
  if (!(noise_power >= 0.0)) throw std::invalid_argument("true_covariance: noise power must be >= 0");
  if (p.size() != a.heights()) throw std::invalid_argument("true_covariance: profile/steering size mismatch");
  const CMatrix& steer = a.matrix();
  CMatrix sigma = steer * p.values().asDiagonal() * steer.adjoint();
  sigma.diagonal().array() += noise_power;
  // exact Hermitian symmetry
  sigma = (0.5 * (sigma + sigma.adjoint())).eval();
  return sigma;
}

namespace {

void fill_circular_gaussian(CMatrix& m, double variance, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5 * variance));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      m(i, j) = Complex(re, im);
    }
  }
}

}  // namespace

CMatrix draw_speckle_stack(const SteeringMatrix& a, const ReflectivityProfile& p, double noise_power,
                           std::size_t looks, Rng& rng) {
  if (looks < 1) throw std::invalid_argument("draw_speckle_stack: need at least one look");
  if (!(noise_power >= 0.0)) throw std::invalid_argument("draw_speckle_stack: noise power must be >= 0");
  if (p.size() != a.heights()) throw std::invalid_argument("draw_speckle_stack: profile/steering size mismatch");
  const auto n = static_cast<Eigen::Index>(a.tracks());
  const auto l = static_cast<Eigen::Index>(looks);
  CMatrix speckle(static_cast<Eigen::Index>(a.heights()), l);
  fill_circular_gaussian(speckle, 1.0, rng);
  CMatrix stack = (a.matrix() * p.values().cwiseSqrt().asDiagonal()) * speckle;
  if (noise_power > 0.0) {
    CMatrix noise(n, l);
    fill_circular_gaussian(noise, noise_power, rng);
    stack += noise;
  }
  return stack;
}

SampleCovariance sample_covariance(const CMatrix& stack) {
  if (stack.cols() < 1 || stack.rows() < 1) throw std::invalid_argument("sample_covariance: empty stack");
  SampleCovariance out;
  out.looks = static_cast<std::size_t>(stack.cols());
  out.sigma = (stack * stack.adjoint()) / static_cast<double>(stack.cols());
  out.sigma = (0.5 * (out.sigma + out.sigma.adjoint())).eval();
  out.sigma.diagonal() = out.sigma.diagonal().real().cast<Complex>();
  return out;
}

SampleCorrelation correlation_normalize(const SampleCovariance& cov) {
  const RVector diag = cov.sigma.diagonal().real();
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(diag[i] > 0.0)) {
      throw NumericalError("correlation_normalize: channel " + std::to_string(i) + " has zero intensity");
    }
  }
  const RVector q = diag.cwiseSqrt().cwiseInverse();
  SampleCorrelation out{q.asDiagonal() * cov.sigma * q.asDiagonal()};
  out.r.diagonal().setOnes();
  return out;
}

std::size_t train_count(std::size_t count, double split) {
  return static_cast<std::size_t>(std::llround(split * static_cast<double>(count)));
}

std::vector<std::size_t> split_permutation(std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> perm(count);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_stream(seed, 0, 0x53504c54);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

std::vector<std::size_t> Dataset::train_indices() const {
  auto perm = split_permutation(size(), seed);
  perm.resize(train_count(size(), split));
  return perm;
}

std::vector<std::size_t> Dataset::validation_indices() const {
  const auto perm = split_permutation(size(), seed);
  return {perm.begin() + static_cast<std::ptrdiff_t>(train_count(size(), split)), perm.end()};
}

Dataset build_dataset(const DatasetSpec& spec, const ProfilePrior& prior,
                      const std::vector<AcquisitionGeometry>& geometries, const HeightGrid& grid) {
  if (spec.count < 1) throw std::invalid_argument("build_dataset: count must be >= 1");
  if (spec.looks < 1) throw std::invalid_argument("build_dataset: looks must be >= 1");
  if (geometries.empty()) throw std::invalid_argument("build_dataset: geometry list is empty");
  if (!(spec.split > 0.0 && spec.split < 1.0)) throw std::invalid_argument("build_dataset: split must be in (0, 1)");
  prior.validate();
  const std::size_t tracks = geometries.front().tracks();
  for (const auto& g : geometries) {
    if (g.tracks() != tracks) throw std::invalid_argument("build_dataset: geometries differ in track count");
  }

  std::vector<SteeringMatrix> steering;
  steering.reserve(geometries.size());
  for (const auto& g : geometries) steering.emplace_back(g, grid);

  Dataset ds;
  ds.tracks = static_cast<std::uint32_t>(tracks);
  ds.heights = static_cast<std::uint32_t>(grid.size());
  ds.looks = static_cast<std::uint32_t>(spec.looks);
  ds.seed = spec.seed;
  ds.split = spec.split;
  const auto nz = static_cast<Eigen::Index>(grid.size());
  const auto count = static_cast<Eigen::Index>(spec.count);
  ds.inputs.resize(nz, count);
  ds.targets.resize(nz, count);
  ds.trace_scale.resize(count);
  ds.geometry_index.resize(spec.count);

  parallel_for(spec.count, spec.threads, [&](std::size_t i) {
    Rng rng = make_stream(spec.seed, i, 0x44534554);
    const GaussianMixtureParams params = sample_profile_params(prior, rng);
    const ReflectivityProfile profile = render_profile(params, grid);
    const std::size_t g = std::uniform_int_distribution<std::size_t>(0, geometries.size() - 1)(rng);
    const CMatrix stack = draw_speckle_stack(steering[g], profile, prior.noise_power, spec.looks, rng);
    const SampleCovariance cov = sample_covariance(stack);
    const SampleCorrelation corr = correlation_normalize(cov);
    const auto col = static_cast<Eigen::Index>(i);
    ds.inputs.col(col) = beamforming(corr.r, steering[g]).profile;
    ds.targets.col(col) = profile.values();
    ds.trace_scale[col] = cov.trace_scale();
    ds.geometry_index[i] = static_cast<std::uint32_t>(g);
  });
  return ds;
}

namespace {
constexpr std::uint32_t kDatasetVersion = 1;
}

void save_dataset(const std::string& path, const Dataset& ds) {
  BinaryWriter out(path);
  out.magic("TOMOSDS");
  out.u32(kDatasetVersion);
  out.u64(ds.size());
  out.u32(ds.tracks);
  out.u32(ds.heights);
  out.u32(ds.looks);
  out.u64(ds.seed);
  out.f64(ds.split);
  for (Eigen::Index j = 0; j < ds.inputs.cols(); ++j) {
    for (Eigen::Index i = 0; i < ds.inputs.rows(); ++i) out.f64(ds.inputs(i, j));
    for (Eigen::Index i = 0; i < ds.targets.rows(); ++i) out.f64(ds.targets(i, j));
    out.f64(ds.trace_scale[j]);
    out.f64(static_cast<double>(ds.geometry_index[static_cast<std::size_t>(j)]));
  }
  out.close();
}

Dataset load_dataset(const std::string& path) {
  BinaryReader in(path);
  in.expect_magic("TOMOSDS");
  if (const auto v = in.u32(); v != kDatasetVersion) {
    throw IoError(path + ": unsupported dataset version " + std::to_string(v));
  }
  Dataset ds;
  const std::uint64_t count = in.u64();
  ds.tracks = in.u32();
  ds.heights = in.u32();
  ds.looks = in.u32();
  ds.seed = in.u64();
  ds.split = in.f64();
  if (ds.heights == 0 || count == 0 || count > (1ull << 32)) throw IoError(path + ": implausible header");
  const auto nz = static_cast<Eigen::Index>(ds.heights);
  const auto n = static_cast<Eigen::Index>(count);
  ds.inputs.resize(nz, n);
  ds.targets.resize(nz, n);
  ds.trace_scale.resize(n);
  ds.geometry_index.resize(count);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < nz; ++i) ds.inputs(i, j) = in.f64();
    for (Eigen::Index i = 0; i < nz; ++i) ds.targets(i, j) = in.f64();
    ds.trace_scale[j] = in.f64();
    ds.geometry_index[static_cast<std::size_t>(j)] = static_cast<std::uint32_t>(in.f64());
  }
  in.expect_end();
  return ds;
}

void export_dataset_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const auto perm = split_permutation(ds.size(), ds.seed);
  const std::size_t n_train = train_count(ds.size(), ds.split);
  std::vector<char> is_train(ds.size(), 0);
  for (std::size_t k = 0; k < n_train; ++k) is_train[perm[k]] = 1;
  out << "index,set,geometry_index,trace_scale";
  for (std::uint32_t i = 0; i < ds.heights; ++i) out << ",input_" << i;
  for (std::uint32_t i = 0; i < ds.heights; ++i) out << ",target_" << i;
  out << '\n' << std::setprecision(17);
  for (std::size_t j = 0; j < ds.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    out << j << ',' << (is_train[j] ? "train" : "validation") << ',' << ds.geometry_index[j] << ','
        << ds.trace_scale[c];
    for (Eigen::Index i = 0; i < ds.inputs.rows(); ++i) out << ',' << ds.inputs(i, c);
    for (Eigen::Index i = 0; i < ds.targets.rows(); ++i) out << ',' << ds.targets(i, c);
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace tomosar

#include "tomosar/evalharness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace tomosar {

double normalized_baseline_error(const RVector& bf_profile, const RVector& reference) {
  if (bf_profile.size() != reference.size()) throw std::invalid_argument("baseline error: size mismatch");
  const double self = bf_profile.squaredNorm();
  if (!(self > 0.0)) throw std::invalid_argument("baseline error: beamforming profile is all zero");
  return (bf_profile * (bf_profile.dot(reference) / self) - reference).squaredNorm();
}

std::vector<AcquisitionGeometry> SceneDescription::geometries(std::uint64_t seed) const {
  return geometry_ramp(columns.size(), tracks, resolution_near, resolution_far, perturbation, seed);
}

SceneDescription make_scene(const ProfilePrior& prior, std::size_t n_columns, std::size_t looks, std::uint64_t seed) {
  prior.validate();
  if (n_columns < 1) throw std::invalid_argument("make_scene: need at least one column");
  if (looks < 1) throw std::invalid_argument("make_scene: looks must be >= 1");
  Rng rng = make_stream(seed, 0, 0x5343454e);
  std::uniform_real_distribution<double> freq(0.5, 1.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  struct Wave {
    double f;
    double phi;
  };
  std::vector<Wave> waves(6);
  for (auto& w : waves) w = {freq(rng), phase(rng)};
  auto value = [&](const Range& r, const Wave& w, double x) {
    return r.min + (r.max - r.min) * (0.5 + 0.45 * std::sin(2.0 * kPi * w.f * x + w.phi));
  };

  SceneDescription desc;
  desc.looks = looks;
  desc.noise_power = prior.noise_power;
  desc.columns.reserve(n_columns);
  for (std::size_t i = 0; i < n_columns; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(n_columns);
    GaussianMixtureParams p;
    p.amp_ground = value(prior.amp_ground, waves[0], x);
    p.amp_canopy = value(prior.amp_canopy, waves[1], x);
    p.mu_ground = value(prior.mu_ground, waves[2], x);
    p.mu_canopy = std::max(value(prior.mu_canopy, waves[3], x), p.mu_ground + 1e-3);
    p.sigma_ground = value(prior.sigma_ground, waves[4], x);
    p.sigma_canopy = value(prior.sigma_canopy, waves[5], x);
    p.validate();
    desc.columns.push_back(p);
  }
  return desc;
}

SceneStack simulate_scene(const SceneDescription& desc, const std::vector<AcquisitionGeometry>& geometries,
                          const HeightGrid& grid, std::uint64_t seed, unsigned threads) {
  const std::size_t n = desc.columns.size();
  if (n == 0) throw std::invalid_argument("simulate_scene: empty scene");
  if (geometries.size() != n) throw std::invalid_argument("simulate_scene: need one geometry per column");
  SceneStack stack;
  stack.geometries = geometries;
  stack.covariances.resize(n);
  stack.correlations.resize(n);
  stack.truth.method = "truth";
  stack.truth.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(grid.size()));
  stack.truth.geometry_index.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, i, 0x434f4c4d);
    const ReflectivityProfile profile = render_profile(desc.columns[i], grid);
    const SteeringMatrix a(geometries[i], grid);
    const CMatrix looks = draw_speckle_stack(a, profile, desc.noise_power, desc.looks, rng);
    stack.covariances[i] = sample_covariance(looks);
    stack.correlations[i] = correlation_normalize(stack.covariances[i]);
    stack.truth.values.row(static_cast<Eigen::Index>(i)) = profile.values().transpose();
    stack.truth.geometry_index[i] = static_cast<std::uint32_t>(i);
  });
  return stack;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::beamforming: return "beamforming";
    case Method::capon: return "capon";
    case Method::cs: return "cs";
    case Method::network: return "network";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : kAllMethods) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method '" + name + "' (expected beamforming, capon, cs or network)");
}

Tomogram reconstruct_tomogram(const SceneStack& stack, const HeightGrid& grid, Method method,
                              const MethodConfig& config) {
  const std::size_t n = stack.correlations.size();
  if (n == 0 || stack.covariances.size() != n || stack.geometries.size() != n) {
    throw std::invalid_argument("reconstruct_tomogram: inconsistent scene stack");
  }
  if (method == Method::network && config.weights == nullptr) {
    throw std::invalid_argument("reconstruct_tomogram: the network method needs trained weights");
  }
  if (method == Method::network && config.weights->input_size() != grid.size()) {
    throw std::invalid_argument("reconstruct_tomogram: network input size does not match the height grid");
  }
  Tomogram out;
  out.method = to_string(method);
  const auto nz = static_cast<Eigen::Index>(grid.size());
  out.values.resize(static_cast<Eigen::Index>(n), nz);
  out.geometry_index.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.geometry_index[i] = static_cast<std::uint32_t>(i);

  if (method == Method::network) {
    RMatrix inputs(nz, static_cast<Eigen::Index>(n));
    parallel_for(n, config.threads, [&](std::size_t i) {
      const SteeringMatrix a(stack.geometries[i], grid);
      inputs.col(static_cast<Eigen::Index>(i)) = beamforming(stack.correlations[i].r, a).profile;
    });
    const RMatrix raw = infer(*config.weights, inputs).cwiseMax(0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      out.values.row(c) = raw.col(c).transpose() * stack.covariances[i].trace_scale();
    }
    return out;
  }

  std::optional<WaveletBasis> basis;
  if (method == Method::cs) basis.emplace(wavelet_basis(grid.size(), config.cs.wavelet));
  parallel_for(n, config.threads, [&](std::size_t i) {
    const SteeringMatrix a(stack.geometries[i], grid);
    RVector profile;
    switch (method) {
      case Method::beamforming: profile = beamforming(stack.correlations[i].r, a).profile; break;
      case Method::capon: profile = capon(stack.correlations[i].r, a, config.capon_loading).profile; break;
      case Method::cs: profile = fista_solve(stack.covariances[i].sigma, a, *basis, config.cs).profile; break;
      case Method::network: break;
    }
    out.values.row(static_cast<Eigen::Index>(i)) = profile.transpose();
  });
  return out;
}

std::size_t canopy_split_index(const GaussianMixtureParams& params, const HeightGrid& grid) {
  const double mid = 0.5 * (params.mu_ground + params.mu_canopy);
  const double pos = std::ceil((mid - grid.z_min()) / grid.spacing());
  return static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(grid.size() - 1)));
}

RidgeMeasure canopy_ridge(const RVector& profile, const HeightGrid& grid, std::size_t split_index) {
  const auto n = profile.size();
  if (static_cast<std::size_t>(n) != grid.size()) throw std::invalid_argument("canopy_ridge: size mismatch");
  if (split_index >= grid.size()) throw std::invalid_argument("canopy_ridge: split index out of range");
  Eigen::Index peak = static_cast<Eigen::Index>(split_index);
  for (Eigen::Index i = peak; i < n; ++i) {
    if (profile[i] > profile[peak]) peak = i;
  }
  const double half = 0.5 * profile[peak];
  Eigen::Index lo = peak;
  Eigen::Index hi = peak;
  while (lo > 0 && profile[lo - 1] >= half) --lo;
  while (hi + 1 < n && profile[hi + 1] >= half) ++hi;
  return {static_cast<std::size_t>(peak), static_cast<double>(hi - lo + 1) * grid.spacing()};
}

std::vector<LatentSweepRow> latent_sweep(const std::vector<std::size_t>& latent_sizes,
                                         const std::vector<std::uint64_t>& seeds, const Dataset& ds,
                                         const TrainingConfig& config, const std::vector<std::size_t>& hidden,
                                         double leaky_slope) {
  if (latent_sizes.empty()) throw std::invalid_argument("latent_sweep: no latent sizes");
  if (seeds.empty()) throw std::invalid_argument("latent_sweep: need at least one seed");
  std::vector<LatentSweepRow> rows;
  for (std::size_t latent : latent_sizes) {
    const auto sizes = symmetric_sizes(ds.heights, hidden, latent);
    LatentSweepRow row;
    row.latent = latent;
    for (std::uint64_t seed : seeds) {
      TrainingConfig c = config;
      c.seed = seed;
      row.values.push_back(train(ds, c, sizes, leaky_slope).history.back().validation_mse);
    }
    const double k = static_cast<double>(row.values.size());
    for (double v : row.values) row.mean += v / k;
    if (row.values.size() > 1) {
      double ss = 0.0;
      for (double v : row.values) ss += (v - row.mean) * (v - row.mean);
      row.std_dev = std::sqrt(ss / (k - 1.0));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

TimingReport timing_benchmark(const std::vector<Method>& methods, const SceneStack& stack, const HeightGrid& grid,
                              MethodConfig config, std::size_t repetitions, std::optional<double> training_seconds) {
  if (repetitions < 1) throw std::invalid_argument("timing_benchmark: repetitions must be >= 1");
  config.threads = 1;
  TimingReport report;
  for (Method m : methods) {
    std::vector<double> times;
    RMatrix first;
    for (std::size_t r = 0; r < repetitions; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      Tomogram t = reconstruct_tomogram(stack, grid, m, config);
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
      if (r == 0) {
        first = std::move(t.values);
      } else if (t.values.size() != first.size() ||
                 std::memcmp(t.values.data(), first.data(), sizeof(double) * static_cast<std::size_t>(first.size())) != 0) {
        report.deterministic = false;
      }
    }
    std::sort(times.begin(), times.end());
    const std::size_t k = times.size();
    const double median = k % 2 ? times[k / 2] : 0.5 * (times[k / 2 - 1] + times[k / 2]);
    report.rows.push_back({to_string(m), median, median / static_cast<double>(stack.correlations.size()) * 1e6, 0.0});
  }
  if (training_seconds) report.rows.push_back({"training", *training_seconds, 0.0, 0.0});
  const auto cs = std::find_if(report.rows.begin(), report.rows.end(), [](const TimingRow& r) { return r.method == "cs"; });
  if (cs != report.rows.end()) {
    for (auto& r : report.rows) r.speedup_vs_cs = r.median_seconds > 0.0 ? cs->median_seconds / r.median_seconds : 0.0;
  }
  return report;
}

RealizationSet speckle_realizations(const GaussianMixtureParams& params, const AcquisitionGeometry& geometry,
                                    const HeightGrid& grid, std::size_t looks, double noise_power,
                                    std::size_t count, std::uint64_t seed, const MethodConfig& config) {
  if (count < 1) throw std::invalid_argument("speckle_realizations: count must be >= 1");
  RealizationSet set;
  const ReflectivityProfile profile = render_profile(params, grid);
  set.truth = profile.values();
  for (Method m : kAllMethods) {
    if (m == Method::network && config.weights == nullptr) continue;
    set.methods.push_back(m);
  }
  const SteeringMatrix a(geometry, grid);
  const WaveletBasis basis = wavelet_basis(grid.size(), config.cs.wavelet);
  const auto nz = static_cast<Eigen::Index>(grid.size());
  for (std::size_t k = 0; k < set.methods.size(); ++k) set.profiles.emplace_back(static_cast<Eigen::Index>(count), nz);
  parallel_for(count, config.threads, [&](std::size_t r) {
    Rng rng = make_stream(seed, r, 0x5245414c);
    const SampleCovariance cov = sample_covariance(draw_speckle_stack(a, profile, noise_power, looks, rng));
    const SampleCorrelation corr = correlation_normalize(cov);
    const auto row = static_cast<Eigen::Index>(r);
    for (std::size_t k = 0; k < set.methods.size(); ++k) {
      RVector p;
      switch (set.methods[k]) {
        case Method::beamforming: p = beamforming(corr.r, a).profile; break;
        case Method::capon: p = capon(corr.r, a, config.capon_loading).profile; break;
        case Method::cs: p = fista_solve(cov.sigma, a, basis, config.cs).profile; break;
        case Method::network:
          p = predict_profile(*config.weights, beamforming(corr.r, a).profile, cov.trace_scale());
          break;
      }
      set.profiles[k].row(row) = p.transpose();
    }
  });
  return set;
}

namespace {

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace

void write_tomogram_csv(const std::string& path, const Tomogram& t, const HeightGrid& grid) {
  if (t.heights() != grid.size()) throw std::invalid_argument("write_tomogram_csv: grid size mismatch");
  auto out = open_out(path);
  out << "azimuth,height,value\n" << std::setprecision(17);
  for (Eigen::Index j = 0; j < t.values.rows(); ++j) {
    for (Eigen::Index i = 0; i < t.values.cols(); ++i) out << j << ',' << grid[static_cast<std::size_t>(i)] << ',' << t.values(j, i) << '\n';
  }
  finish(out, path);
}

void write_tomogram_pgm(const std::string& path, const Tomogram& t) {
  if (t.values.size() == 0) throw std::invalid_argument("write_tomogram_pgm: empty tomogram");
  const double lo = t.values.minCoeff();
  const double hi = t.values.maxCoeff();
  const double range = hi > lo ? hi - lo : 1.0;
  auto out = open_out(path, std::ios::binary | std::ios::trunc);
  out << "P5\n" << t.values.rows() << ' ' << t.values.cols() << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(t.values.rows()));
  for (Eigen::Index i = t.values.cols(); i-- > 0;) {
    for (Eigen::Index j = 0; j < t.values.rows(); ++j) {
      row[static_cast<std::size_t>(j)] = static_cast<unsigned char>(std::lround(255.0 * (t.values(j, i) - lo) / range));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  finish(out, path);
  const std::string side = path + ".txt";
  auto meta = open_out(side);
  meta << std::setprecision(17) << "method = " << t.method << "\nmin = " << lo << "\nmax = " << hi << '\n';
  finish(meta, side);
}

void write_sweep_csv(const std::string& path, const std::vector<LatentSweepRow>& rows) {
  auto out = open_out(path);
  out << "latent_size,mean_mse,std_mse,repeats\n" << std::setprecision(17);
  for (const auto& r : rows) out << r.latent << ',' << r.mean << ',' << r.std_dev << ',' << r.values.size() << '\n';
  finish(out, path);
}

void write_timing_csv(const std::string& path, const TimingReport& report) {
  auto out = open_out(path);
  out << "method,median_seconds,per_profile_us,speedup_vs_cs\n" << std::setprecision(9);
  for (const auto& r : report.rows) {
    out << r.method << ',' << r.median_seconds << ',' << r.per_profile_us << ',' << r.speedup_vs_cs << '\n';
  }
  finish(out, path);
}

void write_realizations_csv(const std::string& path, const RealizationSet& set, const HeightGrid& grid) {
  auto out = open_out(path);
  out << "realization,method,height,value\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < set.truth.size(); ++i) out << "-1,truth," << grid[static_cast<std::size_t>(i)] << ',' << set.truth[i] << '\n';
  for (std::size_t k = 0; k < set.methods.size(); ++k) {
    const RMatrix& m = set.profiles[k];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index i = 0; i < m.cols(); ++i) {
        out << r << ',' << to_string(set.methods[k]) << ',' << grid[static_cast<std::size_t>(i)] << ',' << m(r, i) << '\n';
      }
    }
  }
  finish(out, path);
}

}  // namespace tomosar

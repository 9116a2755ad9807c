// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   acceptance [--workdir DIR] [--only 1,4,9]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "tomosar/config.hpp"
#include "tomosar/evalharness.hpp"

namespace fs = std::filesystem;
using namespace tomosar;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::vector<double> to_std(const RVector& v) { return {v.data(), v.data() + v.size()}; }

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

HeightGrid grid_of(const RunConfig& c) { return make_height_grid(c.grid.z_min, c.grid.z_max, c.grid.heights); }

std::vector<AcquisitionGeometry> ramp_of(const RunConfig& c) {
  return geometry_ramp(c.geometry.count, c.geometry.tracks, c.geometry.resolution_near, c.geometry.resolution_far,
                       c.geometry.perturbation, c.geometry.seed);
}

SceneStack default_scene(const RunConfig& c, const HeightGrid& grid, std::size_t columns) {
  SceneDescription desc = make_scene(c.prior, columns, c.scene.looks, c.scene.seed);
  desc.tracks = c.geometry.tracks;
  desc.resolution_near = c.geometry.resolution_near;
  desc.resolution_far = c.geometry.resolution_far;
  desc.perturbation = c.geometry.perturbation;
  return simulate_scene(desc, desc.geometries(c.geometry.seed), grid, c.scene.seed, c.threads);
}

// State shared by criteria 6-8.
struct Shared {
  RunConfig config = load_config("");
  std::optional<NetworkWeights> network;
  double training_seconds = 0.0;
};

// 1. Backpropagation against central differences on the full default architecture.
Outcome criterion_gradients(Shared& s) {
  const auto grid = grid_of(s.config);
  DatasetSpec spec{8, s.config.simulation.looks, 5, 0.75, 1};
  const Dataset ds = build_dataset(spec, s.config.prior, ramp_of(s.config), grid);
  const auto w = init_network(s.config.layer_sizes(), s.config.network.leaky_slope, 17);
  const auto res = gradcheck::check(w, ds.inputs, ds.targets, 100, 1e-4, 23);
  return {res.checked == 100 && res.worst_relative < 1e-4,
          "worst relative error " + fmt(res.worst_relative) + " over " + std::to_string(res.checked) +
              " weights (bound 1e-4, " + std::to_string(res.shrunk) + " steps shrunk at kinks)"};
}

// 2. Beamforming of the identity and of a unit scatterer.
Outcome criterion_estimator(Shared& s) {
  const auto grid = grid_of(s.config);
  const auto geoms = ramp_of(s.config);
  double flat_dev = 0.0;
  double peak_dev = 0.0;
  for (std::size_t g = 0; g < geoms.size(); g += 20) {
    const SteeringMatrix a(geoms[g], grid);
    const double n = static_cast<double>(a.tracks());
    const RVector flat = beamforming(CMatrix::Identity(6, 6), a).profile;
    flat_dev = std::max(flat_dev, (flat.array() - 1.0 / n).abs().maxCoeff() * n);
    for (std::size_t i : {0u, 200u, 511u}) {
      const CVector a0 = a.column(i);
      peak_dev = std::max(peak_dev, std::abs(beamforming(a0 * a0.adjoint(), a).profile[static_cast<Eigen::Index>(i)] - 1.0));
    }
  }
  // exact up to double rounding of |exp(j theta)|^2
  const double bound = 1e-14;
  return {flat_dev <= bound && peak_dev <= bound,
          "max relative deviation: flat " + fmt(flat_dev) + ", unit scatterer " + fmt(peak_dev) + " (bound 1e-14)"};
}

// 3. FISTA against exhaustive search, and monotone objective on random instances.
Outcome criterion_cs(Shared&) {
  RVector kz(3);
  kz << 0.0, 0.21, 0.47;
  const AcquisitionGeometry g3(kz);
  const auto grid4 = make_height_grid(0.0, 15.0, 4);
  const SteeringMatrix a(g3, grid4);
  const auto ident = wavelet_basis(4, "identity");
  const std::vector<double> p_star{0.05, 0.0, 0.03, 0.07};
  const double lambda = 1e-3;
  const CMatrix sigma = oracle::planted_covariance(to_std(kz), to_std(grid4.heights()), p_star, lambda);
  CsConfig cfg;
  cfg.lambda = lambda;
  cfg.max_iter = 200000;
  cfg.rel_tol = 1e-15;
  cfg.nonneg_projection = false;
  const auto sol = fista_solve(sigma, a, ident, cfg);
  // step 1e-3 over [-0.01, 0.1] in every coordinate
  const auto best = oracle::exhaustive_min4(to_std(kz), to_std(grid4.heights()), sigma, lambda, -0.01, 1e-3, 111);
  const double gap = std::abs(sol.objective.back() - best.value);

  const auto grid = make_height_grid(-10, 50, 64);
  std::size_t monotone = 0;
  std::size_t total_restarts = 0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    Rng rng = make_stream(4242, k);
    std::normal_distribution<double> nd;
    CMatrix y(6, 10);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = Complex(nd(rng), nd(rng));
    const SteeringMatrix ak(synthesize_geometry(6, 6.0 + static_cast<double>(k % 10), 0.3, k), grid);
    CsConfig c;
    c.max_iter = 300;
    const auto r = fista_solve(sample_covariance(y).sigma, ak, wavelet_basis(64, k % 2 ? "db2" : "haar"), c);
    total_restarts += r.restarts;
    bool ok = true;
    for (std::size_t i = 1; i < r.objective.size(); ++i) ok = ok && r.objective[i] <= r.objective[i - 1];
    monotone += ok ? 1 : 0;
  }
  return {gap <= 1e-6 && monotone == 50,
          "objective gap to grid search " + fmt(gap) + " (bound 1e-6, grid minimum " + fmt(best.value) + "); monotone on " +
              std::to_string(monotone) + "/50 random instances (" + std::to_string(total_restarts) + " restarts)"};
}

// 4. Speckle covariance against the model covariance, and its convergence rate.
Outcome criterion_speckle(Shared& s) {
  const auto grid = grid_of(s.config);
  const auto geoms = ramp_of(s.config);
  const SteeringMatrix a(geoms[geoms.size() / 2], grid);
  const auto prof = render_profile({1.0, 1.5, 0.0, 18.0, 2.0, 4.0}, grid);
  const double noise = s.config.prior.noise_power;
  const CMatrix sigma = true_covariance(a, prof, noise);
  auto error_at = [&](std::size_t m, std::uint64_t stream) {
    Rng rng = make_stream(31, stream);
    const CMatrix y = draw_speckle_stack(a, prof, noise, m, rng);
    return (y * y.adjoint() / static_cast<double>(m) - sigma).norm() / sigma.norm();
  };
  const int reps = 10;
  double small = 0.0;
  double large = 0.0;
  double worst_large = 0.0;
  for (int r = 0; r < reps; ++r) {
    small += error_at(1000, 2 * r) / reps;
    const double e = error_at(100000, 2 * r + 1);
    large += e / reps;
    worst_large = std::max(worst_large, e);
  }
  // two decades of draws: the per-decade factor is the square root of the ratio
  const double per_decade = std::sqrt(small / large);
  const bool ok = worst_large < 0.02 && per_decade >= 3.2 / 3.0 && per_decade <= 3.2 * 3.0;
  return {ok, "1e5-draw error worst " + fmt(worst_large) + " (bound 0.02); error ratio 1e3/1e5 = " + fmt(small / large) +
                  ", per decade " + fmt(per_decade) + " (bounds [1.067, 9.6])"};
}

// 5. Latent-size trend at reduced scale.
Outcome criterion_latent(Shared& s) {
  const auto grid = grid_of(s.config);
  DatasetSpec spec{2000, s.config.simulation.looks, s.config.simulation.seed, 0.75, s.config.threads};
  const Dataset ds = build_dataset(spec, s.config.prior, ramp_of(s.config), grid);
  TrainingConfig tc = s.config.training;
  tc.epochs = 100;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t k = 0; k < 5; ++k) seeds.push_back(s.config.sweep.seed + k);
  const auto rows = latent_sweep({3, 5, 8, 20}, seeds, ds, tc, s.config.sweep.hidden, s.config.network.leaky_slope);
  std::map<std::size_t, double> mean;
  std::ostringstream table;
  for (const auto& r : rows) {
    mean[r.latent] = r.mean;
    table << " L" << r.latent << "=" << fmt(r.mean) << "+-" << fmt(r.std_dev);
  }
  const double gap = mean[3] / mean[5] - 1.0;
  const double joint = (mean[5] + mean[8] + mean[20]) / 3.0;
  double spread = 0.0;
  for (std::size_t l : {5u, 8u, 20u}) spread = std::max(spread, std::abs(mean[l] / joint - 1.0));
  write_sweep_csv((fs::path(".") / "criterion5_sweep.csv").string(), rows);
  return {gap >= 0.05 && spread <= 0.05, "MSE(3)/MSE(5) - 1 = " + fmt(gap) + " (need >= 0.05); max deviation of {5,8,20} from joint mean " +
                                             fmt(spread) + " (need <= 0.05);" + table.str()};
}

// Trains the default network once for criteria 6-8.
const NetworkWeights& default_network(Shared& s, Dataset* out_ds = nullptr) {
  static std::optional<Dataset> ds;
  if (!ds) {
    const auto grid = grid_of(s.config);
    DatasetSpec spec{s.config.simulation.count, s.config.simulation.looks, s.config.simulation.seed,
                     s.config.simulation.split, s.config.threads};
    ds = build_dataset(spec, s.config.prior, ramp_of(s.config), grid);
  }
  if (!s.network) {
    const auto t0 = Clock::now();
    auto res = train(*ds, s.config.training, s.config.layer_sizes(), s.config.network.leaky_slope);
    s.training_seconds = seconds_since(t0);
    s.network = std::move(res.weights);
    save_weights("criterion6_weights.bin", *s.network);
    write_history_csv("criterion6_history.csv", res.history);
  }
  if (out_ds) *out_ds = *ds;
  return *s.network;
}

// 6. Trained network beats the beamforming baseline on the validation split.
Outcome criterion_beats_input(Shared& s) {
  Dataset ds;
  const auto& w = default_network(s, &ds);
  const auto val = ds.validation_indices();
  const double mse = evaluate_mse(w, ds, val);
  double baseline = 0.0;
  for (std::size_t j : val) {
    const auto c = static_cast<Eigen::Index>(j);
    baseline += normalized_baseline_error(ds.inputs.col(c), ds.targets.col(c)) / static_cast<double>(val.size());
  }
  // The baseline is a sum over heights, the MSE a mean; the per-profile sum of squared
  // errors is also reported and must beat the baseline too.
  const double sse = mse * static_cast<double>(ds.heights);
  return {mse < baseline && sse < baseline,
          "validation MSE " + fmt(mse) + " (per-profile sum " + fmt(sse) + ") vs mean baseline error " + fmt(baseline) +
              " on " + std::to_string(val.size()) + " validation profiles; trained in " + fmt(s.training_seconds) + " s"};
}

// 7. Single-threaded timing order on a 200 x 512 tomogram.
Outcome criterion_timing(Shared& s) {
  const auto& w = default_network(s);
  const auto grid = grid_of(s.config);
  const auto stack = default_scene(s.config, grid, 200);
  MethodConfig mc;
  mc.capon_loading = s.config.capon_loading;
  mc.cs = s.config.cs;
  mc.weights = &w;
  const auto report = timing_benchmark({std::begin(kAllMethods), std::end(kAllMethods)}, stack, grid, mc, 5,
                                       s.training_seconds);
  write_timing_csv("criterion7_timing.csv", report);
  std::map<std::string, double> t;
  for (const auto& r : report.rows) t[r.method] = r.median_seconds;
  const bool ok = t["beamforming"] <= t["capon"] && t["capon"] < t["cs"] / 50.0 && t["network"] <= 3.0 * t["beamforming"];
  return {ok, "median seconds: beamforming " + fmt(t["beamforming"]) + ", capon " + fmt(t["capon"]) + ", cs " + fmt(t["cs"]) +
                  ", network " + fmt(t["network"]) + "; cs/network speedup " + fmt(t["cs"] / t["network"]) +
                  (report.deterministic ? "; outputs bit-identical across repetitions" : "; OUTPUTS DIFFER across repetitions")};
}

// 8. Canopy ridge of the network tomogram is narrower than beamforming's, with peaks
// placed within 2 bins of the truth.
Outcome criterion_resolution(Shared& s) {
  const auto& w = default_network(s);
  const auto grid = grid_of(s.config);
  const auto scene = make_scene(s.config.prior, s.config.scene.columns, s.config.scene.looks, s.config.scene.seed);
  const auto stack = default_scene(s.config, grid, s.config.scene.columns);
  MethodConfig mc;
  mc.weights = &w;
  mc.threads = s.config.threads;
  const auto bf = reconstruct_tomogram(stack, grid, Method::beamforming, mc);
  const auto net = reconstruct_tomogram(stack, grid, Method::network, mc);
  double width_bf = 0.0;
  double width_net = 0.0;
  double width_truth = 0.0;
  std::size_t agree_truth = 0;
  std::size_t agree_bf = 0;
  std::vector<double> offsets;
  const std::size_t n = stack.truth.columns();
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto split = canopy_split_index(scene.columns[i], grid);
    const auto rb = canopy_ridge(bf.values.row(row).transpose(), grid, split);
    const auto rn = canopy_ridge(net.values.row(row).transpose(), grid, split);
    const auto rt = canopy_ridge(stack.truth.values.row(row).transpose(), grid, split);
    width_bf += rb.half_power_width / static_cast<double>(n);
    width_net += rn.half_power_width / static_cast<double>(n);
    width_truth += rt.half_power_width / static_cast<double>(n);
    auto close = [](std::size_t x, std::size_t y) { return (x > y ? x - y : y - x) <= 2; };
    agree_truth += close(rn.peak_index, rt.peak_index) ? 1 : 0;
    agree_bf += close(rn.peak_index, rb.peak_index) ? 1 : 0;
    offsets.push_back(std::abs(grid[rn.peak_index] - grid[rt.peak_index]));
  }
  std::sort(offsets.begin(), offsets.end());
  const double frac = static_cast<double>(agree_truth) / static_cast<double>(n);
  write_tomogram_pgm("criterion8_beamforming.pgm", bf);
  write_tomogram_pgm("criterion8_network.pgm", net);
  write_tomogram_pgm("criterion8_truth.pgm", stack.truth);
  return {width_net < width_bf && frac >= 0.8,
          "mean canopy half-power width: network " + fmt(width_net) + " m, beamforming " + fmt(width_bf) + " m, truth " +
              fmt(width_truth) + " m; network peak within 2 bins (" + fmt(2 * grid.spacing()) + " m) of truth on " +
              std::to_string(agree_truth) + "/" + std::to_string(n) + " columns (need >= 80%); of beamforming on " +
              std::to_string(agree_bf) + "/" + std::to_string(n) +
              "; median network-truth peak offset " + fmt(offsets[n / 2]) + " m, 90th percentile " + fmt(offsets[n * 9 / 10]) + " m"};
}

// 9. Every stage twice from scratch, outputs compared byte for byte.
Outcome criterion_determinism(Shared& s) {
  auto run = [&](const fs::path& dir) {
    fs::create_directories(dir);
    RunConfig c = s.config;
    c.simulation.count = 300;
    c.training.epochs = 3;
    const auto grid = grid_of(c);
    DatasetSpec spec{c.simulation.count, c.simulation.looks, c.simulation.seed, c.simulation.split, 4};
    const Dataset ds = build_dataset(spec, c.prior, ramp_of(c), grid);
    save_dataset((dir / "dataset.bin").string(), ds);
    export_dataset_csv((dir / "dataset.csv").string(), ds);
    const auto trained = train(ds, c.training, c.layer_sizes(), c.network.leaky_slope);
    save_weights((dir / "weights.bin").string(), trained.weights);
    write_history_csv((dir / "history.csv").string(), trained.history);
    TrainingConfig tiny = c.training;
    tiny.epochs = 2;
    write_sweep_csv((dir / "sweep.csv").string(), latent_sweep({3, 5}, {1, 2}, ds, tiny, c.sweep.hidden));
    const auto stack = default_scene(c, grid, 12);
    MethodConfig mc;
    mc.weights = &trained.weights;
    mc.threads = 3;
    mc.cs.max_iter = 100;
    write_tomogram_csv((dir / "truth.csv").string(), stack.truth, grid);
    for (Method m : kAllMethods) {
      const auto t = reconstruct_tomogram(stack, grid, m, mc);
      write_tomogram_csv((dir / ("tomogram_" + to_string(m) + ".csv")).string(), t, grid);
      write_tomogram_pgm((dir / ("tomogram_" + to_string(m) + ".pgm")).string(), t);
    }
    mc.cs.max_iter = 30;
    write_realizations_csv((dir / "realizations.csv").string(),
                           speckle_realizations(make_scene(c.prior, 1, 64, 3).columns[0], ramp_of(c)[0], grid, 64,
                                                c.prior.noise_power, 4, 9, mc),
                           grid);
  };
  run("determinism_a");
  run("determinism_b");
  std::size_t files = 0;
  std::vector<std::string> differing;
  for (const auto& e : fs::directory_iterator("determinism_a")) {
    ++files;
    const auto other = fs::path("determinism_b") / e.path().filename();
    if (!fs::exists(other) || read_bytes(e.path()) != read_bytes(other)) differing.push_back(e.path().filename().string());
  }
  std::string detail = std::to_string(files - differing.size()) + "/" + std::to_string(files) + " files byte-identical";
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty() && files > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path workdir = "acceptance_work";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--workdir" && i + 1 < argc) {
      workdir = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string item; std::getline(ss, item, ',');) only.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance [--workdir DIR] [--only 1,2,...]\n";
      return 2;
    }
  }
  fs::create_directories(workdir);
  fs::current_path(workdir);

  Shared shared;
  shared.config.threads = default_threads();
  const std::vector<std::pair<std::string, std::function<Outcome(Shared&)>>> criteria{
      {"gradient correctness", criterion_gradients},
      {"estimator exactness", criterion_estimator},
      {"cs solver vs oracle", criterion_cs},
      {"statistical model fidelity", criterion_speckle},
      {"latent-size trend", criterion_latent},
      {"network beats its input", criterion_beats_input},
      {"timing order", criterion_timing},
      {"resolution improvement", criterion_resolution},
      {"determinism", criterion_determinism},
  };

  int failed = 0;
  std::ofstream summary("acceptance_results.txt");
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[k].second(shared);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const std::string line = "criterion " + std::to_string(id) + " [" + criteria[k].first + "]: " + (o.pass ? "PASS" : "FAIL") +
                             " | " + o.detail + " | " + fmt(seconds_since(t0)) + " s";
    std::cout << line << std::endl;
    summary << line << '\n';
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed")) << std::endl;
  return failed ? 1 : 0;
}

// Command-line driver: simulate, train, reconstruct, sweep-latent, benchmark, export, realizations.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tomosar/config.hpp"
#include "tomosar/evalharness.hpp"

namespace fs = std::filesystem;
using namespace tomosar;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct Globals {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

RunConfig resolve(const Globals& g) {
  RunConfig c = load_config(g.config_path);
  for (const auto& o : g.overrides) apply_override(c, o);
  if (g.seed) apply_seed(c, *g.seed);
  if (g.threads) c.threads = *g.threads;
  return c;
}

std::string out_path(const RunConfig& c, const std::string& name) {
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + c.output_dir + "': " + ec.message());
  return (fs::path(c.output_dir) / name).string();
}

HeightGrid grid_of(const RunConfig& c) { return make_height_grid(c.grid.z_min, c.grid.z_max, c.grid.heights); }

std::vector<AcquisitionGeometry> geometries_of(const RunConfig& c) {
  return geometry_ramp(c.geometry.count, c.geometry.tracks, c.geometry.resolution_near, c.geometry.resolution_far,
                       c.geometry.perturbation, c.geometry.seed);
}

// FNV-1a over the kz bit patterns.
std::string geometry_digest(const std::vector<AcquisitionGeometry>& geoms) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& g : geoms) {
    for (Eigen::Index i = 0; i < g.kz().size(); ++i) {
      const auto bits = std::bit_cast<std::uint64_t>(g.kz()[i]);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 1099511628211ull;
      }
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Dataset dataset_for(const RunConfig& c, const std::string& path) {
  if (!path.empty()) return load_dataset(path);
  const std::string def = out_path(c, "dataset.bin");
  if (!fs::exists(def)) throw IoError("no dataset at '" + def + "'; run `simulate` first or pass --dataset");
  return load_dataset(def);
}

SceneStack scene_for(const RunConfig& c, const HeightGrid& grid) {
  SceneDescription desc = make_scene(c.prior, c.scene.columns, c.scene.looks, c.scene.seed);
  desc.tracks = c.geometry.tracks;
  desc.resolution_near = c.geometry.resolution_near;
  desc.resolution_far = c.geometry.resolution_far;
  desc.perturbation = c.geometry.perturbation;
  return simulate_scene(desc, desc.geometries(c.geometry.seed), grid, c.scene.seed, c.threads);
}

MethodConfig method_config(const RunConfig& c, const NetworkWeights* weights) {
  MethodConfig m;
  m.capon_loading = c.capon_loading;
  m.cs = c.cs;
  m.weights = weights;
  m.threads = c.threads;
  return m;
}

int cmd_simulate(const Globals& g) {
  const RunConfig c = resolve(g);
  const auto grid = grid_of(c);
  const auto geoms = geometries_of(c);
  DatasetSpec spec{c.simulation.count, c.simulation.looks, c.simulation.seed, c.simulation.split, c.threads};
  const Dataset ds = build_dataset(spec, c.prior, geoms, grid);
  const std::string path = out_path(c, "dataset.bin");
  save_dataset(path, ds);
  std::cout << "wrote " << path << "\n"
            << "examples: " << ds.size() << " (train " << ds.train_indices().size() << ", validation "
            << ds.validation_indices().size() << ")\n"
            << "looks: " << ds.looks << ", tracks: " << ds.tracks << ", heights: " << ds.heights << "\n"
            << "geometries: " << geoms.size() << " digest " << geometry_digest(geoms) << "\n";
  return 0;
}

int cmd_train(const Globals& g, const std::string& dataset_path) {
  RunConfig c = resolve(g);
  const Dataset ds = dataset_for(c, dataset_path);
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r = train(ds, c.training, c.layer_sizes(), c.network.leaky_slope);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string weights = out_path(c, "weights.bin");
  save_weights(weights, r.weights);
  write_history_csv(out_path(c, "loss_history.csv"), r.history);
  {
    std::ofstream t(weights + ".time");
    t << seconds << '\n';
  }
  std::cout << "wrote " << weights << " and " << out_path(c, "loss_history.csv") << "\n"
            << "epochs: " << r.history.size() << ", final train MSE " << r.history.back().train_mse
            << ", validation MSE " << r.history.back().validation_mse << ", " << seconds << " s\n";
  return 0;
}

int cmd_reconstruct(const Globals& g, const std::string& method_name, const std::string& weights_path) {
  const RunConfig c = resolve(g);
  std::vector<Method> methods;
  if (method_name == "all") {
    methods.assign(std::begin(kAllMethods), std::end(kAllMethods));
  } else {
    methods.push_back(parse_method(method_name));
  }
  const bool needs_weights = std::find(methods.begin(), methods.end(), Method::network) != methods.end();
  if (needs_weights && weights_path.empty()) throw ConfigError("method 'network' requires --weights");
  std::optional<NetworkWeights> weights;
  if (needs_weights) weights = load_weights(weights_path);
  const auto grid = grid_of(c);
  const SceneStack stack = scene_for(c, grid);
  const MethodConfig mc = method_config(c, weights ? &*weights : nullptr);
  write_tomogram_csv(out_path(c, "tomogram_truth.csv"), stack.truth, grid);
  write_tomogram_pgm(out_path(c, "tomogram_truth.pgm"), stack.truth);
  for (Method m : methods) {
    const Tomogram t = reconstruct_tomogram(stack, grid, m, mc);
    const std::string base = out_path(c, "tomogram_" + to_string(m));
    write_tomogram_csv(base + ".csv", t, grid);
    write_tomogram_pgm(base + ".pgm", t);
    std::cout << "wrote " << base << ".csv/.pgm (" << t.columns() << " x " << t.heights() << ")\n";
  }
  return 0;
}

int cmd_sweep(const Globals& g, const std::string& dataset_path) {
  const RunConfig c = resolve(g);
  if (c.sweep.repeats == 1) std::cerr << "warning: sweep.repeats = 1, standard deviations are reported as 0\n";
  const Dataset ds = dataset_for(c, dataset_path);
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < c.sweep.repeats; ++r) seeds.push_back(c.sweep.seed + r);
  const auto rows = latent_sweep(c.sweep.latent_sizes, seeds, ds, c.training, c.sweep.hidden, c.network.leaky_slope);
  const std::string path = out_path(c, "sweep_latent.csv");
  write_sweep_csv(path, rows);
  for (const auto& r : rows) std::cout << "latent " << r.latent << ": " << r.mean << " +- " << r.std_dev << "\n";
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_benchmark(const Globals& g, const std::string& weights_path) {
  RunConfig c = resolve(g);
  c.threads = 1;
  const NetworkWeights weights = load_weights(weights_path);
  std::optional<double> training_seconds;
  if (std::ifstream t(weights_path + ".time"); t) {
    double s = 0.0;
    if (t >> s) training_seconds = s;
  }
  if (!training_seconds) std::cerr << "warning: no training time recorded next to " << weights_path << "\n";
  const auto grid = grid_of(c);
  const SceneStack stack = scene_for(c, grid);
  const TimingReport report =
      timing_benchmark({std::begin(kAllMethods), std::end(kAllMethods)}, stack, grid, method_config(c, &weights),
                       c.benchmark_repetitions, training_seconds);
  const std::string path = out_path(c, "benchmark.csv");
  write_timing_csv(path, report);
  for (const auto& r : report.rows) {
    std::cout << r.method << ": " << r.median_seconds << " s (" << r.per_profile_us << " us/profile, x"
              << r.speedup_vs_cs << " vs cs)\n";
  }
  if (!report.deterministic) {
    throw NumericalError("benchmark: repeated reconstructions were not bit-identical");
  }
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_export(const Globals& g, const std::string& dataset_path) {
  const RunConfig c = resolve(g);
  const Dataset ds = dataset_for(c, dataset_path);
  const std::string path = out_path(c, "dataset.csv");
  export_dataset_csv(path, ds);
  std::cout << "wrote " << path << " (" << ds.size() << " rows)\n";
  return 0;
}

int cmd_realizations(const Globals& g, const std::string& weights_path) {
  const RunConfig c = resolve(g);
  std::optional<NetworkWeights> weights;
  if (!weights_path.empty()) weights = load_weights(weights_path);
  const auto grid = grid_of(c);
  const SceneDescription desc = make_scene(c.prior, 1, c.scene.looks, c.scene.seed);
  const auto geom = synthesize_geometry(c.geometry.tracks, c.geometry.resolution_near, c.geometry.perturbation,
                                        c.geometry.seed);
  const RealizationSet set = speckle_realizations(desc.columns.front(), geom, grid, c.simulation.looks,
                                                  c.prior.noise_power, c.scene.realizations, c.scene.seed,
                                                  method_config(c, weights ? &*weights : nullptr));
  const std::string path = out_path(c, "realizations.csv");
  write_realizations_csv(path, set, grid);
  std::cout << "wrote " << path << " (" << c.scene.realizations << " realizations, " << set.methods.size()
            << " methods)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forest SAR tomography: simulation, classical and learned profile inversion"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("-c,--config", g.config_path, "Structured-text configuration file");
  app.add_option("--set", g.overrides, "Override a key, e.g. --set training.epochs=10");
  app.add_option("--seed", g.seed, "Override every seed in the configuration");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware concurrency)");

  std::string dataset_path;
  std::string weights_path;
  std::string method;

  auto* simulate = app.add_subcommand("simulate", "Generate the training dataset");
  auto* train_cmd = app.add_subcommand("train", "Train the encoder-decoder on a dataset");
  train_cmd->add_option("--dataset", dataset_path, "Dataset file (default: <output>/dataset.bin)");
  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct the synthetic scene tomogram");
  reconstruct->add_option("--method", method, "beamforming | capon | cs | network | all")->required();
  reconstruct->add_option("--weights", weights_path, "Trained weights (network method)");
  auto* sweep = app.add_subcommand("sweep-latent", "Latent-size study");
  sweep->add_option("--dataset", dataset_path, "Dataset file (default: <output>/dataset.bin)");
  auto* bench = app.add_subcommand("benchmark", "Single-threaded timing of all methods");
  bench->add_option("--weights", weights_path, "Trained weights")->required();
  auto* exp = app.add_subcommand("export", "Dataset to CSV");
  exp->add_option("--dataset", dataset_path, "Dataset file (default: <output>/dataset.bin)");
  auto* real = app.add_subcommand("realizations", "Per-realization profiles of one column under resampled speckle");
  real->add_option("--weights", weights_path, "Trained weights (adds the network method)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(g);
    if (*train_cmd) return cmd_train(g, dataset_path);
    if (*reconstruct) return cmd_reconstruct(g, method, weights_path);
    if (*sweep) return cmd_sweep(g, dataset_path);
    if (*bench) return cmd_benchmark(g, weights_path);
    if (*exp) return cmd_export(g, dataset_path);
    if (*real) return cmd_realizations(g, weights_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}

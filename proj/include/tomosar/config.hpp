#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tomosar/csinvert.hpp"
#include "tomosar/neuralnet.hpp"
#include "tomosar/simulator.hpp"

namespace tomosar {

struct IniEntry {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// `[section]` headers, `key = value` lines, `#` or `;` comments.
std::vector<IniEntry> parse_ini(std::istream& in, const std::string& source);

struct GeometrySettings {
  std::size_t tracks = 6;
  double resolution_near = 6.0;
  double resolution_far = 25.0;
  double perturbation = 0.2;
  std::size_t count = 200;  // distinct geometries along the range ramp
  std::uint64_t seed = 7;
};

struct GridSettings {
  double z_min = -10.0;
  double z_max = 50.0;
  std::size_t heights = 512;
};

struct SimulationSettings {
  std::size_t count = 10000;
  std::size_t looks = 100;
  std::uint64_t seed = 1;
  double split = 0.75;
};

struct NetworkSettings {
  std::vector<std::size_t> hidden{256, 64, 16};
  std::size_t latent = 5;
  double leaky_slope = kDefaultLeakySlope;
};

struct SceneSettings {
  std::size_t columns = 200;
  std::size_t looks = 64;
  std::uint64_t seed = 11;
  std::size_t realizations = 100;
};

struct SweepSettings {
  std::vector<std::size_t> latent_sizes{3, 4, 5, 6, 8, 10, 15, 20};
  std::size_t repeats = 5;
  std::vector<std::size_t> hidden{256, 64, 32};
  std::uint64_t seed = 100;
};

struct RunConfig {
  GeometrySettings geometry;
  GridSettings grid;
  ProfilePrior prior;
  SimulationSettings simulation;
  NetworkSettings network;
  TrainingConfig training;
  CsConfig cs;
  double capon_loading = 1e-2;
  SceneSettings scene;
  SweepSettings sweep;
  std::size_t benchmark_repetitions = 3;
  std::string output_dir = "out";
  unsigned threads = 0;

  std::vector<std::size_t> layer_sizes() const;
  /// Throws ConfigError naming the offending key.
  void validate() const;
};

RunConfig parse_config(std::istream& in, const std::string& source);
/// Empty path yields the defaults.
RunConfig load_config(const std::string& path);
/// `section.key=value`, applied as if it appeared last in the file.
void apply_override(RunConfig& config, const std::string& assignment);
/// Sets every seed in the configuration.
void apply_seed(RunConfig& config, std::uint64_t seed);

}  // namespace tomosar

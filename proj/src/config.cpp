#include "tomosar/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

namespace tomosar {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) throw std::invalid_argument("expected a number");
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw std::invalid_argument("expected a nonnegative integer");
  }
  return out;
}

std::size_t to_size(const std::string& v) { return static_cast<std::size_t>(to_u64(v)); }

bool to_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw std::invalid_argument("expected true or false");
}

Range to_range(const std::string& v) {
  const auto parts = split_list(v);
  if (parts.size() != 2) throw std::invalid_argument("expected 'min, max'");
  return {to_double(parts[0]), to_double(parts[1])};
}

std::vector<std::size_t> to_size_list(const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& p : split_list(v)) out.push_back(to_size(p));
  if (out.empty()) throw std::invalid_argument("expected a comma-separated list");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"geometry.tracks", [](RunConfig& c, const std::string& v) { c.geometry.tracks = to_size(v); }},
      {"geometry.resolution_near", [](RunConfig& c, const std::string& v) { c.geometry.resolution_near = to_double(v); }},
      {"geometry.resolution_far", [](RunConfig& c, const std::string& v) { c.geometry.resolution_far = to_double(v); }},
      {"geometry.perturbation", [](RunConfig& c, const std::string& v) { c.geometry.perturbation = to_double(v); }},
      {"geometry.count", [](RunConfig& c, const std::string& v) { c.geometry.count = to_size(v); }},
      {"geometry.seed", [](RunConfig& c, const std::string& v) { c.geometry.seed = to_u64(v); }},
      {"grid.z_min", [](RunConfig& c, const std::string& v) { c.grid.z_min = to_double(v); }},
      {"grid.z_max", [](RunConfig& c, const std::string& v) { c.grid.z_max = to_double(v); }},
      {"grid.heights", [](RunConfig& c, const std::string& v) { c.grid.heights = to_size(v); }},
      {"prior.preset", [](RunConfig& c, const std::string& v) {
         const double noise = c.prior.noise_power;
         c.prior = parse_forest_preset(v) == ForestPreset::boreal ? ProfilePrior::boreal() : ProfilePrior::tropical();
         c.prior.noise_power = noise;
       }},
      {"prior.amp_ground", [](RunConfig& c, const std::string& v) { c.prior.amp_ground = to_range(v); }},
      {"prior.amp_canopy", [](RunConfig& c, const std::string& v) { c.prior.amp_canopy = to_range(v); }},
      {"prior.mu_ground", [](RunConfig& c, const std::string& v) { c.prior.mu_ground = to_range(v); }},
      {"prior.mu_canopy", [](RunConfig& c, const std::string& v) { c.prior.mu_canopy = to_range(v); }},
      {"prior.sigma_ground", [](RunConfig& c, const std::string& v) { c.prior.sigma_ground = to_range(v); }},
      {"prior.sigma_canopy", [](RunConfig& c, const std::string& v) { c.prior.sigma_canopy = to_range(v); }},
      {"prior.noise_power", [](RunConfig& c, const std::string& v) { c.prior.noise_power = to_double(v); }},
      {"simulation.count", [](RunConfig& c, const std::string& v) { c.simulation.count = to_size(v); }},
      {"simulation.looks", [](RunConfig& c, const std::string& v) { c.simulation.looks = to_size(v); }},
      {"simulation.seed", [](RunConfig& c, const std::string& v) { c.simulation.seed = to_u64(v); }},
      {"simulation.split", [](RunConfig& c, const std::string& v) { c.simulation.split = to_double(v); }},
      {"network.hidden", [](RunConfig& c, const std::string& v) { c.network.hidden = to_size_list(v); }},
      {"network.latent", [](RunConfig& c, const std::string& v) { c.network.latent = to_size(v); }},
      {"network.leaky_slope", [](RunConfig& c, const std::string& v) { c.network.leaky_slope = to_double(v); }},
      {"training.epochs", [](RunConfig& c, const std::string& v) { c.training.epochs = to_size(v); }},
      {"training.batch_size", [](RunConfig& c, const std::string& v) { c.training.batch_size = to_size(v); }},
      {"training.learning_rate", [](RunConfig& c, const std::string& v) { c.training.learning_rate = to_double(v); }},
      {"training.split", [](RunConfig& c, const std::string& v) { c.training.split = to_double(v); }},
      {"training.seed", [](RunConfig& c, const std::string& v) { c.training.seed = to_u64(v); }},
      {"training.beta1", [](RunConfig& c, const std::string& v) { c.training.beta1 = to_double(v); }},
      {"training.beta2", [](RunConfig& c, const std::string& v) { c.training.beta2 = to_double(v); }},
      {"training.epsilon", [](RunConfig& c, const std::string& v) { c.training.epsilon = to_double(v); }},
      {"cs.lambda", [](RunConfig& c, const std::string& v) {
         if (v == "auto") c.cs.lambda.reset();
         else c.cs.lambda = to_double(v);
       }},
      {"cs.max_iter", [](RunConfig& c, const std::string& v) { c.cs.max_iter = to_size(v); }},
      {"cs.rel_tol", [](RunConfig& c, const std::string& v) { c.cs.rel_tol = to_double(v); }},
      {"cs.wavelet", [](RunConfig& c, const std::string& v) { c.cs.wavelet = v; }},
      {"cs.nonneg", [](RunConfig& c, const std::string& v) { c.cs.nonneg_projection = to_bool(v); }},
      {"capon.loading", [](RunConfig& c, const std::string& v) { c.capon_loading = to_double(v); }},
      {"scene.columns", [](RunConfig& c, const std::string& v) { c.scene.columns = to_size(v); }},
      {"scene.looks", [](RunConfig& c, const std::string& v) { c.scene.looks = to_size(v); }},
      {"scene.seed", [](RunConfig& c, const std::string& v) { c.scene.seed = to_u64(v); }},
      {"scene.realizations", [](RunConfig& c, const std::string& v) { c.scene.realizations = to_size(v); }},
      {"sweep.latent_sizes", [](RunConfig& c, const std::string& v) { c.sweep.latent_sizes = to_size_list(v); }},
      {"sweep.repeats", [](RunConfig& c, const std::string& v) { c.sweep.repeats = to_size(v); }},
      {"sweep.hidden", [](RunConfig& c, const std::string& v) { c.sweep.hidden = to_size_list(v); }},
      {"sweep.seed", [](RunConfig& c, const std::string& v) { c.sweep.seed = to_u64(v); }},
      {"benchmark.repetitions", [](RunConfig& c, const std::string& v) { c.benchmark_repetitions = to_size(v); }},
      {"output.directory", [](RunConfig& c, const std::string& v) { c.output_dir = v; }},
      {"run.threads", [](RunConfig& c, const std::string& v) { c.threads = static_cast<unsigned>(to_size(v)); }},
  };
  return table;
}

void apply_entry(RunConfig& config, const std::string& full_key, const std::string& value, const std::string& where) {
  const auto it = setters().find(full_key);
  if (it == setters().end()) throw ConfigError(where + ": unknown key '" + full_key + "'");
  try {
    it->second(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + full_key + ": " + e.what());
  } catch (const std::exception& e) {
    throw ConfigError(where + ": bad value '" + value + "' for " + full_key + ": " + e.what());
  }
}

}  // namespace

std::vector<IniEntry> parse_ini(std::istream& in, const std::string& source) {
  std::vector<IniEntry> entries;
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto c = raw.find_first_of("#;"); c != std::string::npos) raw.resize(c);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    IniEntry e{section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (e.key.empty()) throw ConfigError(where + ": empty key");
    if (e.section.empty()) throw ConfigError(where + ": key '" + e.key + "' outside any [section]");
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<std::size_t> RunConfig::layer_sizes() const {
  return symmetric_sizes(grid.heights, network.hidden, network.latent);
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(key + ": " + what);
  };
  require(geometry.tracks >= 2, "geometry.tracks", "need at least 2 tracks");
  require(geometry.resolution_near > 0.0, "geometry.resolution_near", "must be > 0");
  require(geometry.resolution_far > 0.0, "geometry.resolution_far", "must be > 0");
  require(geometry.perturbation >= 0.0 && geometry.perturbation < 0.5, "geometry.perturbation", "must be in [0, 0.5)");
  require(geometry.count >= 1, "geometry.count", "must be >= 1");
  require(grid.z_min < grid.z_max, "grid.z_min", "must be below grid.z_max");
  require(grid.heights >= 2, "grid.heights", "must be >= 2");
  try {
    prior.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[prior] ") + e.what());
  }
  require(simulation.count >= 1, "simulation.count", "must be >= 1");
  require(simulation.looks >= 1, "simulation.looks", "must be >= 1");
  require(simulation.split > 0.0 && simulation.split < 1.0, "simulation.split", "must be in (0, 1)");
  require(network.hidden.size() == 3, "network.hidden", "expected 3 widths");
  try {
    (void)layer_sizes();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("network.hidden/network.latent: ") + e.what());
  }
  require(network.leaky_slope > 0.0 && network.leaky_slope < 1.0, "network.leaky_slope", "must be in (0, 1)");
  require(training.epochs >= 1, "training.epochs", "must be >= 1");
  require(training.batch_size >= 1, "training.batch_size", "must be >= 1");
  require(training.learning_rate > 0.0, "training.learning_rate", "must be > 0");
  require(training.split > 0.0 && training.split < 1.0, "training.split", "must be in (0, 1)");
  require(training.beta1 >= 0.0 && training.beta1 < 1.0, "training.beta1", "must be in [0, 1)");
  require(training.beta2 >= 0.0 && training.beta2 < 1.0, "training.beta2", "must be in [0, 1)");
  require(training.epsilon > 0.0, "training.epsilon", "must be > 0");
  require(!cs.lambda || *cs.lambda >= 0.0, "cs.lambda", "must be >= 0 or 'auto'");
  require(cs.max_iter >= 1, "cs.max_iter", "must be >= 1");
  require(cs.rel_tol > 0.0, "cs.rel_tol", "must be > 0");
  try {
    (void)wavelet_basis(grid.heights, cs.wavelet);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("cs.wavelet: ") + e.what());
  }
  require(capon_loading >= 0.0, "capon.loading", "must be >= 0");
  require(scene.columns >= 1, "scene.columns", "must be >= 1");
  require(scene.looks >= 1, "scene.looks", "must be >= 1");
  require(scene.realizations >= 1, "scene.realizations", "must be >= 1");
  require(sweep.repeats >= 1, "sweep.repeats", "must be >= 1");
  require(sweep.hidden.size() == 3, "sweep.hidden", "expected 3 widths");
  for (std::size_t latent : sweep.latent_sizes) {
    try {
      (void)symmetric_sizes(grid.heights, sweep.hidden, latent);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("sweep.latent_sizes: latent " + std::to_string(latent) + ": " + e.what());
    }
  }
  require(benchmark_repetitions >= 1, "benchmark.repetitions", "must be >= 1");
  require(!output_dir.empty(), "output.directory", "must not be empty");
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  const auto entries = parse_ini(in, source);
  RunConfig config;
  // The preset resets the prior ranges, so it is applied before any explicit prior key.
  for (const auto& e : entries) {
    if (e.section == "prior" && e.key == "preset") {
      apply_entry(config, "prior.preset", e.value, source + ":" + std::to_string(e.line));
    }
  }
  for (const auto& e : entries) {
    if (e.section == "prior" && e.key == "preset") continue;
    apply_entry(config, e.section + "." + e.key, e.value, source + ":" + std::to_string(e.line));
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::string& path) {
  if (path.empty()) {
    RunConfig config;
    config.validate();
    return config;
  }
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse_config(in, path);
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "': expected section.key=value");
  const std::string key = trim(assignment.substr(0, eq));
  apply_entry(config, key, trim(assignment.substr(eq + 1)), "override");
  config.validate();
}

void apply_seed(RunConfig& config, std::uint64_t seed) {
  config.geometry.seed = seed;
  config.simulation.seed = seed;
  config.training.seed = seed;
  config.scene.seed = seed;
  config.sweep.seed = seed;
}

}  // namespace tomosar

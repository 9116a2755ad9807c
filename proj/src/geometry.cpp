#include "tomosar/geometry.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace tomosar {

HeightGrid::HeightGrid(double z_min, double z_max, std::size_t n_z) : z_min_(z_min), z_max_(z_max) {
  if (!(std::isfinite(z_min) && std::isfinite(z_max)) || !(z_min < z_max)) {
    throw std::invalid_argument("height grid: z_min must be strictly below z_max");
  }
  if (n_z < 2) throw std::invalid_argument("height grid: need at least 2 heights");
  z_.resize(static_cast<Eigen::Index>(n_z));
  const double step = (z_max - z_min) / static_cast<double>(n_z - 1);
  for (std::size_t i = 0; i < n_z; ++i) z_[static_cast<Eigen::Index>(i)] = z_min + step * static_cast<double>(i);
  z_[static_cast<Eigen::Index>(n_z - 1)] = z_max;
}

HeightGrid make_height_grid(double z_min, double z_max, std::size_t n_z) { return HeightGrid(z_min, z_max, n_z); }

AcquisitionGeometry::AcquisitionGeometry(RVector kz, std::uint64_t seed) : kz_(std::move(kz)), seed_(seed) {
  if (kz_.size() < 2) throw std::invalid_argument("geometry: need at least 2 tracks");
  if (kz_[0] != 0.0) throw std::invalid_argument("geometry: master track must have kz = 0");
  for (Eigen::Index i = 0; i < kz_.size(); ++i) {
    if (!std::isfinite(kz_[i])) throw std::invalid_argument("geometry: non-finite kz");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (kz_[i] == kz_[j]) throw std::invalid_argument("geometry: kz values must be pairwise distinct");
    }
  }
}

AcquisitionGeometry synthesize_geometry(std::size_t n_tracks, double vertical_resolution, double perturbation,
                                        std::uint64_t seed) {
  if (n_tracks < 2) throw std::invalid_argument("synthesize_geometry: need at least 2 tracks");
  if (!(vertical_resolution > 0.0) || !std::isfinite(vertical_resolution)) {
    throw std::invalid_argument("synthesize_geometry: vertical resolution must be positive");
  }
  if (!(perturbation >= 0.0 && perturbation < 0.5)) {
    throw std::invalid_argument("synthesize_geometry: perturbation must lie in [0, 0.5)");
  }
  const double span = 2.0 * kPi / vertical_resolution;
  const double step = span / static_cast<double>(n_tracks - 1);
  Rng rng = make_stream(seed, 0, 0x6b7a);
  std::uniform_real_distribution<double> jitter(-perturbation, perturbation);
  RVector kz(static_cast<Eigen::Index>(n_tracks));
  for (std::size_t n = 0; n < n_tracks; ++n) {
    double value = step * static_cast<double>(n);
    if (n > 0 && n + 1 < n_tracks) value += jitter(rng) * step;
    kz[static_cast<Eigen::Index>(n)] = value;
  }
  kz[static_cast<Eigen::Index>(n_tracks - 1)] = span;
  return AcquisitionGeometry(std::move(kz), seed);
}

std::vector<AcquisitionGeometry> geometry_ramp(std::size_t count, std::size_t n_tracks, double near, double far,
                                               double perturbation, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("geometry_ramp: count must be positive");
  std::vector<AcquisitionGeometry> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    out.push_back(synthesize_geometry(n_tracks, near + t * (far - near), perturbation, seed + i));
  }
  return out;
}

CVector steering_vector(const AcquisitionGeometry& geom, double z) {
  const RVector& kz = geom.kz();
  CVector a(kz.size());
  for (Eigen::Index n = 0; n < kz.size(); ++n) a[n] = std::polar(1.0, kz[n] * z);
  return a;
}

SteeringMatrix::SteeringMatrix(const AcquisitionGeometry& geom, const HeightGrid& grid)
    : a_(static_cast<Eigen::Index>(geom.tracks()), static_cast<Eigen::Index>(grid.size())) {
  const RVector& kz = geom.kz();
  const RVector& z = grid.heights();
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    for (Eigen::Index n = 0; n < kz.size(); ++n) a_(n, i) = std::polar(1.0, kz[n] * z[i]);
  }
}

SteeringMatrix steering_matrix(const AcquisitionGeometry& geom, const HeightGrid& grid) {
  return SteeringMatrix(geom, grid);
}

void write_geometry(std::ostream& out, const AcquisitionGeometry& geom) {
  const auto old_precision = out.precision();
  out << "n_tracks = " << geom.tracks() << '\n';
  out << "kz = [" << std::setprecision(17);
  for (Eigen::Index i = 0; i < geom.kz().size(); ++i) out << (i ? ", " : "") << geom.kz()[i];
  out << "]\n";
  out << "seed = " << geom.seed() << '\n';
  out.precision(old_precision);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

AcquisitionGeometry read_geometry(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  long long n_tracks = -1;
  std::uint64_t seed = 0;
  std::vector<double> kz;
  bool have_kz = false;
  auto fail = [&](const std::string& what) {
    throw ConfigError("geometry line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "n_tracks") {
        std::size_t used = 0;
        n_tracks = std::stoll(value, &used);
        if (used != value.size()) fail("bad n_tracks");
      } else if (key == "seed") {
        std::size_t used = 0;
        seed = std::stoull(value, &used);
        if (used != value.size()) fail("bad seed");
      } else if (key == "kz") {
        if (value.size() < 2 || value.front() != '[' || value.back() != ']') fail("kz must be a [..] list");
        std::stringstream items(value.substr(1, value.size() - 2));
        std::string item;
        while (std::getline(items, item, ',')) {
          item = trim(item);
          std::size_t used = 0;
          kz.push_back(std::stod(item, &used));
          if (used != item.size()) fail("bad kz entry '" + item + "'");
        }
        have_kz = true;
      } else {
        fail("unknown key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      fail("cannot parse value for '" + key + "'");
    }
  }
  if (!have_kz) throw ConfigError("geometry: missing kz");
  if (n_tracks >= 0 && static_cast<std::size_t>(n_tracks) != kz.size()) {
    throw ConfigError("geometry: n_tracks does not match kz length");
  }
  try {
    return AcquisitionGeometry(Eigen::Map<const RVector>(kz.data(), static_cast<Eigen::Index>(kz.size())), seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("geometry: ") + e.what());
  }
}

}  // namespace tomosar

#include <doctest.h>

#include "oracles.hpp"
#include "tomosar/simulator.hpp"
#include "tomosar/spectral.hpp"

using namespace tomosar;

namespace {

struct Setup {
  HeightGrid grid = make_height_grid(-10, 50, 512);
  AcquisitionGeometry geom = synthesize_geometry(6, 5.0, 0.1, 21);
  SteeringMatrix a{geom, grid};
};

CMatrix two_scatterers(const SteeringMatrix& a, std::size_t i, std::size_t k) {
  const CVector ai = a.column(i);
  const CVector ak = a.column(k);
  return ai * ai.adjoint() + ak * ak.adjoint();
}

std::vector<std::size_t> local_maxima(const RVector& p) {
  std::vector<std::size_t> out;
  for (Eigen::Index i = 1; i + 1 < p.size(); ++i) {
    if (p[i] > p[i - 1] && p[i] >= p[i + 1]) out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

// Half-power width of the lobe containing `peak`, linearly interpolated between bins.
double lobe_width(const RVector& p, Eigen::Index peak, double dz) {
  const double half = 0.5 * p[peak];
  Eigen::Index lo = peak;
  while (lo > 0 && p[lo - 1] >= half) --lo;
  Eigen::Index hi = peak;
  while (hi + 1 < p.size() && p[hi + 1] >= half) ++hi;
  double left = static_cast<double>(lo);
  if (lo > 0) left -= (p[lo] - half) / (p[lo] - p[lo - 1]);
  double right = static_cast<double>(hi);
  if (hi + 1 < p.size()) right += (p[hi] - half) / (p[hi] - p[hi + 1]);
  return (right - left) * dz;
}

}  // namespace

TEST_CASE("beamforming examples") {
  Setup s;
  const auto flat = beamforming(CMatrix::Identity(6, 6), s.a);
  CHECK(flat.method == "beamforming");
  for (Eigen::Index i = 0; i < flat.profile.size(); ++i) CHECK(flat.profile[i] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));

  const CVector a0 = s.a.column(300);
  const auto single = beamforming(a0 * a0.adjoint(), s.a);
  CHECK(single.profile[300] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(single.profile.maxCoeff() <= 1.0 + 1e-14);

  // matches the direct oracle at every height
  std::vector<double> kz(s.geom.kz().data(), s.geom.kz().data() + 6);
  for (std::size_t i = 0; i < 512; i += 37) {
    CHECK(single.profile[static_cast<Eigen::Index>(i)] == doctest::Approx(oracle::point_response(kz, s.grid[i], s.grid[300])).epsilon(1e-12));
  }
}

TEST_CASE("beamforming is linear and nonnegative") {
  Setup s;
  Rng rng = make_stream(8);
  std::normal_distribution<double> nd;
  auto random_psd = [&] {
    CMatrix y(6, 10);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = Complex(nd(rng), nd(rng));
    return CMatrix(y * y.adjoint() / 10.0);
  };
  const CMatrix r1 = random_psd();
  const CMatrix r2 = random_psd();
  const RVector lhs = beamforming(2.0 * r1 + 0.5 * r2, s.a).profile;
  const RVector rhs = 2.0 * beamforming(r1, s.a).profile + 0.5 * beamforming(r2, s.a).profile;
  CHECK((lhs - rhs).norm() / rhs.norm() < 1e-13);
  CHECK(lhs.minCoeff() >= 0.0);
}

TEST_CASE("beamforming of the mean equals the mean of beamforming") {
  // E[sample covariance] is the true covariance, so averaging beamforming over many
  // independent stacks approaches beamforming of the true covariance.
  Setup s;
  const auto prof = render_profile({1.0, 1.0, 0.0, 20.0, 2.0, 4.0}, s.grid);
  const CMatrix sigma = true_covariance(s.a, prof, 0.1);
  const RVector expect = beamforming(sigma, s.a).profile;
  RVector mean = RVector::Zero(512);
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    Rng rng = make_stream(500, static_cast<std::uint64_t>(t));
    mean += beamforming(sample_covariance(draw_speckle_stack(s.a, prof, 0.1, 25, rng)).sigma, s.a).profile;
  }
  mean /= trials;
  CHECK((mean - expect).norm() / expect.norm() < 0.02);
}

TEST_CASE("two well separated scatterers give two maxima at the right heights") {
  Setup s;
  const std::size_t i = 120;
  const std::size_t k = 300;  // about 21 m apart, resolution 5 m, ambiguity 25 m
  const RVector p = beamforming(two_scatterers(s.a, i, k), s.a).profile;
  const auto maxima = local_maxima(p);
  auto near = [&](std::size_t target) {
    return std::any_of(maxima.begin(), maxima.end(), [&](std::size_t m) { return m + 1 >= target && m <= target + 1; });
  };
  CHECK(near(i));
  CHECK(near(k));
}

TEST_CASE("capon examples") {
  Setup s;
  const auto flat = capon(CMatrix::Identity(6, 6), s.a, 0.0);
  CHECK(flat.method == "capon");
  for (Eigen::Index i = 0; i < 512; ++i) CHECK(flat.profile[i] == doctest::Approx(1.0 / 6.0).epsilon(1e-13));

  const double c = 3.5;
  const double load = 0.2;
  const auto scaled = capon(c * CMatrix::Identity(6, 6), s.a, load);
  for (Eigen::Index i = 0; i < 512; ++i) CHECK(scaled.profile[i] == doctest::Approx(c * (1 + load) / 6.0).epsilon(1e-13));

  // heavy loading flattens towards a scaled beamformer
  const CMatrix r = two_scatterers(s.a, 100, 300);
  const RVector heavy = capon(r, s.a, 1e6).profile;
  CHECK((heavy.maxCoeff() - heavy.minCoeff()) / heavy.mean() < 1e-5);
}

TEST_CASE("capon is sharper than beamforming") {
  Setup s;
  CMatrix r = two_scatterers(s.a, 120, 300) + 0.01 * CMatrix::Identity(6, 6);
  const RVector bf = beamforming(r, s.a).profile;
  const RVector cp = capon(r, s.a).profile;
  const double dz = s.grid.spacing();
  for (Eigen::Index peak : {Eigen::Index(120), Eigen::Index(300)}) {
    Eigen::Index pb = peak;
    Eigen::Index pc = peak;
    bf.segment(peak - 5, 11).maxCoeff(&pb);
    cp.segment(peak - 5, 11).maxCoeff(&pc);
    const double wb = lobe_width(bf, peak - 5 + pb, dz);
    const double wc = lobe_width(cp, peak - 5 + pc, dz);
    CHECK(wc / wb < 1.0);
  }
}

TEST_CASE("estimators are scale covariant") {
  Setup s;
  const CMatrix r = two_scatterers(s.a, 100, 400) + 0.1 * CMatrix::Identity(6, 6);
  for (double c : {0.01, 7.0, 1e4}) {
    CHECK((beamforming(c * r, s.a).profile - c * beamforming(r, s.a).profile).norm() <
          1e-12 * c * beamforming(r, s.a).profile.norm());
    CHECK((capon(c * r, s.a).profile - c * capon(r, s.a).profile).norm() < 1e-10 * c * capon(r, s.a).profile.norm());
  }
}

TEST_CASE("estimator errors") {
  Setup s;
  CHECK_THROWS_AS(beamforming(CMatrix::Identity(5, 5), s.a), std::invalid_argument);
  CHECK_THROWS_AS(capon(CMatrix::Identity(5, 5), s.a), std::invalid_argument);
  CHECK_THROWS_AS(capon(CMatrix::Identity(6, 6), s.a, -0.1), std::invalid_argument);
  // rank-one covariance cannot be inverted without loading
  const CVector a0 = s.a.column(10);
  CHECK_THROWS_AS(capon(a0 * a0.adjoint(), s.a, 0.0), NumericalError);
  CHECK_NOTHROW(capon(a0 * a0.adjoint(), s.a, 1e-2));
  CMatrix neg = -CMatrix::Identity(6, 6);
  CHECK_THROWS_AS(beamforming(neg, s.a), NumericalError);
}

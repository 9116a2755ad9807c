#pragma once

// Finite-difference check of backpropagated gradients on randomly chosen weights.

#include <algorithm>
#include <random>
#include <vector>

#include "tomosar/neuralnet.hpp"

namespace gradcheck {

struct Result {
  double worst_relative = 0.0;
  std::size_t checked = 0;
  std::size_t shrunk = 0;  // entries whose step had to be reduced to avoid a kink
};

// Sign pattern of every pre-activation.
inline std::vector<bool> pattern(const tomosar::NetworkWeights& w, const tomosar::RMatrix& x) {
  std::vector<bool> out;
  for (const auto& z : tomosar::forward(w, x).cache.pre_activations) {
    for (Eigen::Index i = 0; i < z.size(); ++i) out.push_back(z(i) > 0.0);
  }
  return out;
}

// Relative error |g - fd| / max(|g|, |fd|), worst over the sampled entries. The loss
// is piecewise quadratic in any single weight, so central differences are exact away
// from activation kinks and h only trades roundoff against kink crossings.
inline Result check(tomosar::NetworkWeights w, const tomosar::RMatrix& x, const tomosar::RMatrix& target,
                    std::size_t samples, double h, std::uint64_t seed) {
  using namespace tomosar;
  const auto fwd = forward(w, x);
  const auto grads = backward(w, fwd, target);
  Rng rng = make_stream(seed);
  Result res;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto layer = std::uniform_int_distribution<std::size_t>(0, w.layers.size() - 1)(rng);
    RMatrix& m = w.layers[layer];
    const auto r = std::uniform_int_distribution<Eigen::Index>(0, m.rows() - 1)(rng);
    const auto c = std::uniform_int_distribution<Eigen::Index>(0, m.cols() - 1)(rng);
    const double w0 = m(r, c);
    const auto base = pattern(w, x);
    double step = h;
    for (int tries = 0; tries < 6; ++tries) {
      m(r, c) = w0 + step;
      const bool same_plus = pattern(w, x) == base;
      m(r, c) = w0 - step;
      const bool same_minus = pattern(w, x) == base;
      m(r, c) = w0;
      if (same_plus && same_minus) break;
      step *= 0.1;
      if (tries == 0) ++res.shrunk;
    }
    m(r, c) = w0 + step;
    const double fp = mse_loss(infer(w, x), target);
    m(r, c) = w0 - step;
    const double fm = mse_loss(infer(w, x), target);
    m(r, c) = w0;
    const double fd = (fp - fm) / (2.0 * step);
    const double g = grads[layer](r, c);
    const double scale = std::max(std::abs(g), std::abs(fd));
    const double err = scale == 0.0 ? 0.0 : std::abs(g - fd) / scale;
    res.worst_relative = std::max(res.worst_relative, err);
    ++res.checked;
  }
  return res;
}

}  // namespace gradcheck

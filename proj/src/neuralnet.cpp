#include "tomosar/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "tomosar/binary_io.hpp"

namespace tomosar {

std::size_t NetworkWeights::parameter_count() const {
  std::size_t total = 0;
  for (const auto& l : layers) total += static_cast<std::size_t>(l.size());
  return total;
}

void validate_layer_sizes(const std::vector<std::size_t>& sizes) {
  if (sizes.size() != 9) throw std::invalid_argument("network: expected 9 layer sizes (4 encoder + 4 decoder)");
  for (std::size_t k = 0; k < 4; ++k) {
    if (!(sizes[k] > sizes[k + 1])) throw std::invalid_argument("network: encoder sizes must strictly decrease");
    if (sizes[k] != sizes[8 - k]) throw std::invalid_argument("network: decoder sizes must mirror the encoder");
  }
  if (sizes[4] < 1) throw std::invalid_argument("network: latent size must be >= 1");
}

void NetworkWeights::validate() const {
  validate_layer_sizes(sizes);
  if (layers.size() != 8) throw std::invalid_argument("network: expected 8 layers");
  for (std::size_t k = 0; k < 8; ++k) {
    if (static_cast<std::size_t>(layers[k].rows()) != sizes[k + 1] ||
        static_cast<std::size_t>(layers[k].cols()) != sizes[k]) {
      throw std::invalid_argument("network: layer " + std::to_string(k) + " has the wrong shape");
    }
    if (!layers[k].allFinite()) throw std::invalid_argument("network: non-finite weight in layer " + std::to_string(k));
  }
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw std::invalid_argument("network: leaky slope must be in (0, 1)");
}

std::vector<std::size_t> symmetric_sizes(std::size_t input, const std::vector<std::size_t>& hidden,
                                         std::size_t latent) {
  if (hidden.size() != 3) throw std::invalid_argument("network: expected 3 hidden widths");
  std::vector<std::size_t> s{input, hidden[0], hidden[1], hidden[2], latent, hidden[2], hidden[1], hidden[0], input};
  validate_layer_sizes(s);
  return s;
}

std::vector<std::size_t> default_layer_sizes() { return symmetric_sizes(512, {256, 64, 16}, 5); }

NetworkWeights init_network(const std::vector<std::size_t>& sizes, double leaky_slope, std::uint64_t seed) {
  validate_layer_sizes(sizes);
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw std::invalid_argument("network: leaky slope must be in (0, 1)");
  NetworkWeights w;
  w.sizes = sizes;
  w.leaky_slope = leaky_slope;
  Rng rng = make_stream(seed, 0, 0x494e4954);
  for (std::size_t k = 0; k < 8; ++k) {
    const double fan_in = static_cast<double>(sizes[k]);
    const double bound = std::sqrt(6.0 / (fan_in * (1.0 + leaky_slope * leaky_slope)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    RMatrix m(static_cast<Eigen::Index>(sizes[k + 1]), static_cast<Eigen::Index>(sizes[k]));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
    }
    w.layers.push_back(std::move(m));
  }
  return w;
}

namespace {

void leaky_inplace(RMatrix& m, double slope) {
  m = m.unaryExpr([slope](double u) { return u >= 0.0 ? u : slope * u; });
}

void check_input(const NetworkWeights& w, Eigen::Index rows) {
  if (w.layers.empty() || rows != w.layers.front().cols()) {
    throw std::invalid_argument("network: input has " + std::to_string(rows) + " rows, expected " +
                                std::to_string(w.layers.empty() ? 0 : w.layers.front().cols()));
  }
}

}  // namespace

ForwardResult forward(const NetworkWeights& w, const RMatrix& x) {
  check_input(w, x.rows());
  ForwardResult out;
  out.cache.inputs.reserve(w.layers.size());
  out.cache.pre_activations.reserve(w.layers.size());
  RMatrix h = x;
  for (const auto& layer : w.layers) {
    RMatrix z = layer * h;
    out.cache.inputs.push_back(std::move(h));
    h = z;
    leaky_inplace(h, w.leaky_slope);
    out.cache.pre_activations.push_back(std::move(z));
  }
  out.output = std::move(h);
  return out;
}

ForwardResult forward(const NetworkWeights& w, const RVector& x) { return forward(w, RMatrix(x)); }

RMatrix infer(const NetworkWeights& w, const RMatrix& x) {
  check_input(w, x.rows());
  RMatrix h = x;
  for (const auto& layer : w.layers) {
    RMatrix z = layer * h;
    leaky_inplace(z, w.leaky_slope);
    h = std::move(z);
  }
  return h;
}

double mse_loss(const RMatrix& pred, const RMatrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::invalid_argument("mse_loss: shape mismatch");
  }
  if (pred.size() == 0) return 0.0;
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

std::vector<RMatrix> backward(const NetworkWeights& w, const ForwardResult& fwd, const RMatrix& target) {
  if (fwd.output.rows() != target.rows() || fwd.output.cols() != target.cols()) {
    throw std::invalid_argument("backward: target shape mismatch");
  }
  const double slope = w.leaky_slope;
  const std::size_t depth = w.layers.size();
  std::vector<RMatrix> grads(depth);
  RMatrix d_out = (2.0 / static_cast<double>(target.size())) * (fwd.output - target);
  for (std::size_t k = depth; k-- > 0;) {
    const RMatrix& z = fwd.cache.pre_activations[k];
    // derivative at exactly 0 is taken as the slope
    RMatrix d_pre = d_out.cwiseProduct(z.unaryExpr([slope](double u) { return u > 0.0 ? 1.0 : slope; }));
    grads[k].noalias() = d_pre * fwd.cache.inputs[k].transpose();
    if (k > 0) d_out.noalias() = w.layers[k].transpose() * d_pre;
  }
  return grads;
}

AdamState AdamState::for_weights(const NetworkWeights& w) {
  AdamState s;
  for (const auto& l : w.layers) {
    s.m.push_back(RMatrix::Zero(l.rows(), l.cols()));
    s.v.push_back(RMatrix::Zero(l.rows(), l.cols()));
  }
  return s;
}

void adam_step(NetworkWeights& w, const std::vector<RMatrix>& grads, AdamState& state, double lr) {
  if (grads.size() != w.layers.size() || state.m.size() != w.layers.size() || state.v.size() != w.layers.size()) {
    throw std::invalid_argument("adam_step: layer count mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < w.layers.size(); ++k) {
    if (grads[k].rows() != w.layers[k].rows() || grads[k].cols() != w.layers[k].cols()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch in layer " + std::to_string(k));
    }
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * grads[k];
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * grads[k].cwiseAbs2();
    w.layers[k].array() -=
        lr * (state.m[k].array() / c1) / ((state.v[k].array() / c2).sqrt() + state.epsilon);
  }
}

void TrainingConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("training: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("training: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("training: learning rate must be > 0");
  if (!(split > 0.0 && split < 1.0)) throw std::invalid_argument("training: split must be in (0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("training: Adam betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("training: Adam epsilon must be > 0");
}

namespace {

RMatrix gather(const RMatrix& m, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) {
  RMatrix out(m.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t j = begin; j < end; ++j) out.col(static_cast<Eigen::Index>(j - begin)) = m.col(static_cast<Eigen::Index>(idx[j]));
  return out;
}

}  // namespace

double evaluate_mse(const NetworkWeights& w, const Dataset& ds, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("evaluate_mse: no examples selected");
  constexpr std::size_t kChunk = 256;
  double total = 0.0;
  for (std::size_t b = 0; b < indices.size(); b += kChunk) {
    const std::size_t e = std::min(indices.size(), b + kChunk);
    total += (infer(w, gather(ds.inputs, indices, b, e)) - gather(ds.targets, indices, b, e)).squaredNorm();
  }
  return total / (static_cast<double>(indices.size()) * static_cast<double>(ds.targets.rows()));
}

TrainResult train(const Dataset& ds, const TrainingConfig& config, const std::vector<std::size_t>& sizes,
                  double leaky_slope) {
  config.validate();
  if (ds.size() == 0) throw std::invalid_argument("train: dataset is empty");
  if (sizes.front() != ds.heights) {
    throw std::invalid_argument("train: network input size " + std::to_string(sizes.front()) +
                                " does not match dataset height count " + std::to_string(ds.heights));
  }
  const auto perm = split_permutation(ds.size(), ds.seed);
  const std::size_t n_train = train_count(ds.size(), config.split);
  if (n_train < 1 || n_train >= ds.size()) {
    throw std::invalid_argument("train: split must leave at least one training and one validation example");
  }
  std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  const std::vector<std::size_t> val_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());

  TrainResult result;
  result.weights = init_network(sizes, leaky_slope, config.seed);
  AdamState adam = AdamState::for_weights(result.weights);
  adam.beta1 = config.beta1;
  adam.beta2 = config.beta2;
  adam.epsilon = config.epsilon;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = make_stream(config.seed, epoch, 0x45504f43);
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double sum_sq = 0.0;
    for (std::size_t b = 0; b < n_train; b += config.batch_size) {
      const std::size_t e = std::min(n_train, b + config.batch_size);
      const RMatrix x = gather(ds.inputs, train_idx, b, e);
      const RMatrix y = gather(ds.targets, train_idx, b, e);
      const ForwardResult fwd = forward(result.weights, x);
      const double loss = mse_loss(fwd.output, y);
      if (!std::isfinite(loss)) {
        throw NumericalError("train: loss is not finite at epoch " + std::to_string(epoch + 1) + ", batch " +
                             std::to_string(b / config.batch_size + 1));
      }
      sum_sq += loss * static_cast<double>(y.size());
      adam_step(result.weights, backward(result.weights, fwd, y), adam, config.learning_rate);
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_mse = sum_sq / (static_cast<double>(n_train) * static_cast<double>(ds.targets.rows()));
    rec.validation_mse = evaluate_mse(result.weights, ds, val_idx);
    if (!std::isfinite(rec.validation_mse)) {
      throw NumericalError("train: validation loss is not finite at epoch " + std::to_string(epoch + 1));
    }
    result.history.push_back(rec);
  }
  return result;
}

RVector predict_profile(const NetworkWeights& w, const RVector& beamforming_input, double trace_scale) {
  if (!(trace_scale > 0.0) || !std::isfinite(trace_scale)) {
    throw std::invalid_argument("predict_profile: trace scale must be positive");
  }
  return infer(w, RMatrix(beamforming_input)).col(0).cwiseMax(0.0) * trace_scale;
}

namespace {
constexpr std::uint32_t kWeightsVersion = 1;
}

void save_weights(const std::string& path, const NetworkWeights& w) {
  w.validate();
  BinaryWriter out(path);
  out.magic("TOMOSNN");
  out.u32(kWeightsVersion);
  out.u32(static_cast<std::uint32_t>(w.layers.size()));
  out.f64(w.leaky_slope);
  for (const auto& l : w.layers) {
    out.u32(static_cast<std::uint32_t>(l.rows()));
    out.u32(static_cast<std::uint32_t>(l.cols()));
    for (Eigen::Index r = 0; r < l.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.cols(); ++c) out.f64(l(r, c));
    }
  }
  out.close();
}

NetworkWeights load_weights(const std::string& path) {
  BinaryReader in(path);
  in.expect_magic("TOMOSNN");
  if (const auto v = in.u32(); v != kWeightsVersion) {
    throw IoError(path + ": unsupported weights version " + std::to_string(v));
  }
  const std::uint32_t count = in.u32();
  if (count != 8) throw IoError(path + ": expected 8 layers, found " + std::to_string(count));
  NetworkWeights w;
  w.leaky_slope = in.f64();
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t rows = in.u32();
    const std::uint32_t cols = in.u32();
    if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20)) throw IoError(path + ": bad layer shape");
    RMatrix m(rows, cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in.f64();
    }
    if (k == 0) w.sizes.push_back(cols);
    else if (w.sizes.back() != cols) throw IoError(path + ": layer shapes do not chain");
    w.sizes.push_back(rows);
    w.layers.push_back(std::move(m));
  }
  in.expect_end();
  try {
    w.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(path + ": " + e.what());
  }
  return w;
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "epoch,train_mse,validation_mse\n" << std::setprecision(17);
  for (const auto& r : history) out << r.epoch << ',' << r.train_mse << ',' << r.validation_mse << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace tomosar

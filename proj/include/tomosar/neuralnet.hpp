#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tomosar/common.hpp"
#include "tomosar/simulator.hpp"

namespace tomosar {

/// Bias-free encoder/decoder. layers[k] maps sizes[k] -> sizes[k + 1], so layers[k] is
/// sizes[k + 1] x sizes[k]. sizes has 9 entries: 4 encoder layers down to the latent
/// size, then 4 mirrored decoder layers.
struct NetworkWeights {
  std::vector<std::size_t> sizes;
  std::vector<RMatrix> layers;
  double leaky_slope = 0.01;

  std::size_t latent_size() const { return sizes.at(4); }
  std::size_t input_size() const { return sizes.front(); }
  std::size_t parameter_count() const;
  void validate() const;
};

inline constexpr double kDefaultLeakySlope = 0.01;

/// Encoder widths {input, h1, h2, h3, latent} mirrored into the 9-entry layer list.
std::vector<std::size_t> symmetric_sizes(std::size_t input, const std::vector<std::size_t>& hidden, std::size_t latent);
std::vector<std::size_t> default_layer_sizes();  // 512-256-64-16-5-16-64-256-512

/// Throws std::invalid_argument unless sizes describe a valid 4+4 encoder/decoder.
void validate_layer_sizes(const std::vector<std::size_t>& sizes);

/// Uniform on +-sqrt(6 / (fan_in * (1 + slope^2))).
NetworkWeights init_network(const std::vector<std::size_t>& sizes, double leaky_slope, std::uint64_t seed);

/// Per-layer inputs and pre-activations kept for backpropagation. Columns are examples.
struct ForwardCache {
  std::vector<RMatrix> inputs;
  std::vector<RMatrix> pre_activations;
};

struct ForwardResult {
  RMatrix output;
  ForwardCache cache;
};

/// Matrix product then leaky ReLU after every layer, including the last.
ForwardResult forward(const NetworkWeights& w, const RMatrix& x);
ForwardResult forward(const NetworkWeights& w, const RVector& x);
/// Output only; no caches.
RMatrix infer(const NetworkWeights& w, const RMatrix& x);

/// Mean of squared differences over all entries.
double mse_loss(const RMatrix& pred, const RMatrix& target);

/// Gradients of mse_loss(forward(x), target) with respect to each layer.
std::vector<RMatrix> backward(const NetworkWeights& w, const ForwardResult& fwd, const RMatrix& target);

struct AdamState {
  std::vector<RMatrix> m;
  std::vector<RMatrix> v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_weights(const NetworkWeights& w);
};

void adam_step(NetworkWeights& w, const std::vector<RMatrix>& grads, AdamState& state, double lr);

struct TrainingConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double split = 0.75;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double validation_mse = 0.0;
};

struct TrainResult {
  NetworkWeights weights;
  std::vector<EpochRecord> history;
};

/// Mini-batch Adam on the dataset's train split; validation MSE recorded every epoch.
/// The network is initialized from config.seed. Single-threaded and deterministic.
TrainResult train(const Dataset& ds, const TrainingConfig& config, const std::vector<std::size_t>& sizes,
                  double leaky_slope = kDefaultLeakySlope);

/// Mean squared error of the network over the selected dataset columns.
double evaluate_mse(const NetworkWeights& w, const Dataset& ds, const std::vector<std::size_t>& indices);

/// max(network(input), 0) * trace_scale.
RVector predict_profile(const NetworkWeights& w, const RVector& beamforming_input, double trace_scale);

// Little-endian binary:
//   char[8] "TOMOSNN\0", u32 version, u32 layer count, f64 leaky slope,
//   per layer: u32 rows, u32 cols, f64 entries row-major.
void save_weights(const std::string& path, const NetworkWeights& w);
NetworkWeights load_weights(const std::string& path);

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history);

}  // namespace tomosar

#pragma once

#include "hsp/adam.hpp"
#include "hsp/tensor2d.hpp"
#include "hsp/uvmaps.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hsp {

struct Prior2DConfig {
  int input_channels = 32;
  int resolution = 1024;
  double z_std = 0.1;
  double eps_std = 0.02;
  int steps = 4000;
  double learning_rate = 1e-2;
  // Encoder depth; the decoder and the skip paths use the same count.
  int levels = 5;
  int down_channels = 64;
  int up_channels = 64;
  int skip_channels = 4;
  double leaky_slope = 0.2;
  std::uint64_t seed = 1;
};

void validate(const Prior2DConfig& config);

// Encoder-decoder with skip connections: stride-2 downsampling, bilinear
// upsampling, reflection padding, batch statistics normalization.
class Prior2DNetwork {
public:
  Prior2DNetwork(const Prior2DConfig& config, std::uint64_t seed);
  ~Prior2DNetwork();
  Prior2DNetwork(Prior2DNetwork&&) noexcept;
  Prior2DNetwork& operator=(Prior2DNetwork&&) noexcept;

  // input: config.input_channels planes; H and W divisible by 2^levels.
  FeatureMap forward(const FeatureMap& input);
  FeatureMap backward(const FeatureMap& grad_output);

  void zero_grad();
  std::vector<ParamView> parameters();
  int num_parameters();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Fixed network input z ~ N(0, z_std), H x W x input_channels.
FeatureMap make_noise_input(const Prior2DConfig& config, int height, int width, std::uint64_t seed);

struct Prior2DLogEntry {
  int step;
  double mse;  // mean over sites of the squared error summed across channels
};

struct Prior2DResult {
  DenseUVMap map;
  std::vector<Prior2DLogEntry> log;
};

struct Prior2DHooks {
  std::function<void(const Prior2DLogEntry&)> on_step;
  // Called with the noise-free prediction after the listed steps.
  std::vector<int> snapshot_steps;
  std::function<void(int, const DenseUVMap&)> on_snapshot;
};

// Site loss: mean over sites of |bilinear_sample(map) - value|^2.
double site_loss(const FeatureMap& map, const SparseUVSamples& samples, FeatureMap* grad = nullptr);

// Fits the network so its output matches the samples at their sites. The map
// has the samples' height and width. Returns the epsilon-free final forward.
Prior2DResult optimize_2d_prior(const SparseUVSamples& samples, const Prior2DConfig& config,
                                const Prior2DHooks& hooks = {});

// Mean absolute difference between horizontally and vertically adjacent
// pixels, over all channels.
double total_variation(const FeatureMap& map);

std::string format_loss_log(const std::vector<Prior2DLogEntry>& log);

}  // namespace hsp

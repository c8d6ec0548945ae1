#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>

namespace hsp {

// C feature planes of an H x W grid. data is (H*W) x C, column-major, so each
// channel plane is contiguous and pixel (r, c) is row r * W + c.
struct FeatureMap {
  Eigen::MatrixXd data;
  int height = 0;
  int width = 0;

  FeatureMap() = default;
  FeatureMap(int h, int w, int c) : data(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(h) * w, c)), height(h), width(w) {}

  int channels() const { return static_cast<int>(data.cols()); }
  int pixels() const { return height * width; }
  double& at(int r, int c, int ch) { return data(static_cast<Eigen::Index>(r) * width + c, ch); }
  double at(int r, int c, int ch) const { return data(static_cast<Eigen::Index>(r) * width + c, ch); }
};

// Reflection index into [0, n): -1 -> 1, n -> n - 2.
int reflect_index(int i, int n);

// k x k convolution with reflection padding (k - 1) / 2 and the given stride.
class Conv2d {
public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, std::mt19937_64& rng);

  FeatureMap forward(const FeatureMap& x) const;
  // Accumulates weight/bias gradients and returns d(loss)/dx.
  FeatureMap backward(const FeatureMap& x, const FeatureMap& grad_out);

  int output_size(int n) const { return (n + 2 * pad() - kernel_) / stride_ + 1; }
  int pad() const { return (kernel_ - 1) / 2; }

  Eigen::MatrixXd weight, grad_weight;  // out x (in * k * k)
  Eigen::VectorXd bias, grad_bias;

private:
  void im2col(const FeatureMap& x, int row_begin, int row_end, Eigen::MatrixXd& cols) const;
  void col2im(const Eigen::MatrixXd& cols, int row_begin, int row_end, FeatureMap& dx) const;
  int rows_per_tile(int out_width) const;

  int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1;
};

// Per-channel normalization with statistics of the current (single) input
// followed by a learned affine map.
class BatchNorm {
public:
  BatchNorm() = default;
  explicit BatchNorm(int channels);

  FeatureMap forward(const FeatureMap& x);
  FeatureMap backward(const FeatureMap& grad_out);

  Eigen::VectorXd gamma, beta, grad_gamma, grad_beta;
  double epsilon = 1e-5;

private:
  FeatureMap normalized_;
  Eigen::VectorXd inv_std_;
};

FeatureMap leaky_relu(const FeatureMap& x, double slope);
// grad * (x > 0 ? 1 : slope), evaluated against the layer input x.
FeatureMap leaky_relu_backward(const FeatureMap& x, const FeatureMap& grad_out, double slope);

// Bilinear x2 upsampling with half-pixel centers (edges clamped).
FeatureMap upsample2(const FeatureMap& x);
FeatureMap upsample2_backward(const FeatureMap& grad_out, int in_height, int in_width);

FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b);

}  // namespace hsp
